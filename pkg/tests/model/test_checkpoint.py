"""Test the checkpoint format."""

import struct
from typing import Final

import numpy as np
import pytest
from numpy.testing import assert_array_equal
from pycommons.io.temp import temp_dir

from thermogest.errors import (
    BadMagicError,
    DataError,
    TruncatedError,
    VersionMismatchError,
)
from thermogest.model.checkpoint import (
    PREFIX_M,
    decode_checkpoint,
    encode_checkpoint,
    params_from_blobs,
    params_to_blobs,
    read_checkpoint,
    write_checkpoint,
)
from thermogest.model.encoder import EncoderConfig
from thermogest.model.network import GestureNet
from thermogest.model.tcn import PRESETS


def test_network_checkpoint() -> None:
    """Store a network with its Adam moments in a file and load it."""
    net: Final[GestureNet] = GestureNet(EncoderConfig(), PRESETS["mini"])
    for _, p in net.params:
        p.m[...] = 0.25
        p.v[...] = 0.5
    with temp_dir() as td:
        path = td.resolve_inside("x.thgm")
        write_checkpoint(path, {"hello": [1, 2]},
                         params_to_blobs(net.params))
        ckpt = read_checkpoint(path)
    assert ckpt.snapshot == {"hello": [1, 2]}
    assert len(ckpt.blobs) == 3 * len(net.params)
    ps = params_from_blobs(ckpt.blobs, net.params.names())
    for name, p in net.params:
        assert_array_equal(ps[name].value, p.value)
        assert_array_equal(ps[name].m, p.m)
        assert_array_equal(ps[name].v, p.v)


def test_corrupted_checkpoints() -> None:
    """Make sure that corrupted data raises the right errors."""
    data: Final[bytes] = encode_checkpoint(
        {"a": 1}, {"w": np.arange(6.0).reshape(2, 3)})
    assert decode_checkpoint(data, "ok").blobs["w"].shape == (2, 3)
    with pytest.raises(BadMagicError):
        decode_checkpoint(b"XXXX" + data[4:], "magic")
    with pytest.raises(VersionMismatchError):
        decode_checkpoint(data[:4] + struct.pack("<H", 99) + data[6:],
                          "version")
    for cut in (5, 7, 12, len(data) - 1):
        with pytest.raises(TruncatedError):
            decode_checkpoint(data[:cut], "cut")
    with pytest.raises(DataError):
        decode_checkpoint(data + b"\x00", "trailing")


def test_missing_parameters() -> None:
    """Make sure that checkpoints of other networks are rejected."""
    blobs: Final[dict[str, np.ndarray]] = {
        "w": np.ones(2, np.float32), PREFIX_M + "w": np.ones(3, np.float32)}
    with pytest.raises(DataError):
        params_from_blobs(blobs, ("w", "b"))
    with pytest.raises(DataError):
        params_from_blobs(blobs, ("w", ))
