"""
The versioned binary checkpoint format.

A checkpoint file starts with the magic bytes `THGM` and the format
version as `u16`. Then follows a JSON snapshot, stored as its `u32` byte
length and the UTF-8 text, which holds the run configuration and the
training state. Then follow the number of blobs as `u32` and the blobs.
Each blob is its name (`u16` length and UTF-8 text), its number of
dimensions as `u8`, one `u32` per dimension, and its values as
little-endian 32 bit floats. All integers are little-endian.

The parameters of a network are stored under their own names, their Adam
moments under the prefixes `adam.m/` and `adam.v/`.
"""
import json
from dataclasses import dataclass
from typing import Any, Final, Mapping

import numpy as np
from pycommons.io.console import logger
from pycommons.io.path import Path
from pycommons.types import type_error

from thermogest.binary import F32_LE, U8, U16, U32, ByteReader, read_bytes
from thermogest.errors import DataError
from thermogest.model.params import ParamStore

#: the magic bytes of checkpoint files
CHECKPOINT_MAGIC: Final[bytes] = b"THGM"
#: the checkpoint format version
CHECKPOINT_VERSION: Final[int] = 1
#: the prefix of the first Adam moments
PREFIX_M: Final[str] = "adam.m/"
#: the prefix of the second Adam moments
PREFIX_V: Final[str] = "adam.v/"


@dataclass(frozen=True)
class Checkpoint:
    """The contents of a checkpoint file."""

    #: the JSON snapshot with configuration and training state
    snapshot: dict[str, Any]
    #: the named blobs
    blobs: Mapping[str, np.ndarray]


def encode_checkpoint(snapshot: dict[str, Any],
                      blobs: Mapping[str, np.ndarray]) -> bytes:
    """
    Encode a checkpoint into bytes.

    :param snapshot: the JSON-compatible snapshot
    :param blobs: the named blobs
    :return: the bytes

    >>> data = encode_checkpoint({"a": 1}, {"w": np.ones(2)})
    >>> decode_checkpoint(data, "x").blobs["w"].tolist()
    [1.0, 1.0]
    """
    if not isinstance(snapshot, dict):
        raise type_error(snapshot, "snapshot", dict)
    text: Final[bytes] = json.dumps(snapshot, sort_keys=True).encode()
    parts: Final[list[bytes]] = [
        CHECKPOINT_MAGIC, U16.pack(CHECKPOINT_VERSION), U32.pack(len(text)),
        text, U32.pack(len(blobs))]
    for name, value in blobs.items():
        raw_name = name.encode()
        parts.append(U16.pack(len(raw_name)))
        parts.append(raw_name)
        parts.append(U8.pack(value.ndim))
        parts.extend(U32.pack(d) for d in value.shape)
        parts.append(np.ascontiguousarray(value, dtype=F32_LE).tobytes())
    return b"".join(parts)


def decode_checkpoint(data: bytes, what: str) -> Checkpoint:
    """
    Decode a checkpoint from bytes.

    :param data: the bytes
    :param what: the name of the source, for error messages
    :return: the checkpoint
    """
    reader: Final[ByteReader] = ByteReader(data, what)
    reader.header(CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    text_len: Final[int] = reader.unpack(U32)[0]
    try:
        snapshot = json.loads(reader.take(text_len, "snapshot").decode())
    except ValueError as ve:
        raise DataError(f"{what} has a broken snapshot: {ve}") from ve
    if not isinstance(snapshot, dict):
        raise DataError(f"{what} has a snapshot that is not an object.")
    blobs: Final[dict[str, np.ndarray]] = {}
    for _ in range(reader.unpack(U32)[0]):
        name = reader.take(reader.unpack(U16, "blob name")[0],
                           "blob name").decode()
        dims = tuple(reader.unpack(U32, f"shape of {name!r}")[0]
                     for _ in range(reader.unpack(U8, "blob rank")[0]))
        blobs[name] = reader.floats(int(np.prod(dims, dtype=np.int64)),
                                    f"blob {name!r}").reshape(dims)
    reader.finish()
    return Checkpoint(snapshot, blobs)


def write_checkpoint(path: str, snapshot: dict[str, Any],
                     blobs: Mapping[str, np.ndarray]) -> Path:
    """
    Write a checkpoint file.

    :param path: the destination path
    :param snapshot: the JSON-compatible snapshot
    :param blobs: the named blobs
    :return: the path
    """
    dest: Final[Path] = Path(path)
    Path(dest.up()).ensure_dir_exists()
    data: Final[bytes] = encode_checkpoint(snapshot, blobs)
    with open(dest, "wb") as fd:
        fd.write(data)
    logger(f"Wrote checkpoint with {len(blobs)} blobs "
           f"({len(data)} bytes) to {dest!r}.")
    return dest


def read_checkpoint(path: str) -> Checkpoint:
    """
    Read a checkpoint file.

    :param path: the path to the file
    :return: the checkpoint
    """
    data, src = read_bytes(path)
    return decode_checkpoint(data, src)


def params_to_blobs(params: ParamStore, moments: bool = True) \
        -> dict[str, np.ndarray]:
    """
    Collect the blobs of a parameter store.

    :param params: the parameters
    :param moments: should the Adam moments be included?
    :return: the named blobs
    """
    blobs: Final[dict[str, np.ndarray]] = {}
    for name, p in params:
        blobs[name] = p.value
    if moments:
        for name, p in params:
            blobs[PREFIX_M + name] = p.m
        for name, p in params:
            blobs[PREFIX_V + name] = p.v
    return blobs


def params_from_blobs(blobs: Mapping[str, np.ndarray],
                      names: tuple[str, ...]) -> ParamStore:
    """
    Rebuild a parameter store from blobs.

    :param blobs: the named blobs
    :param names: the parameter names in network order
    :return: the parameter store, with Adam moments if they were stored

    >>> ps = ParamStore()
    >>> ps.add("w", np.ones(3, dtype=np.float32))
    >>> ps["w"].m[:] = 0.5
    >>> ps2 = params_from_blobs(params_to_blobs(ps), ("w", ))
    >>> ps2["w"].m.tolist()
    [0.5, 0.5, 0.5]
    """
    ps: Final[ParamStore] = ParamStore()
    for name in names:
        if name not in blobs:
            raise DataError(f"Checkpoint lacks parameter {name!r}.")
        ps.add(name, np.array(blobs[name], dtype=np.float32))
        for prefix, attr in ((PREFIX_M, "m"), (PREFIX_V, "v")):
            if (prefix + name) in blobs:
                moment = blobs[prefix + name]
                if moment.shape != ps[name].value.shape:
                    raise DataError(f"Moment of {name!r} has shape "
                                    f"{moment.shape}.")
                getattr(ps[name], attr)[...] = moment
    return ps
