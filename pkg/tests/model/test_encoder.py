"""Test the spatial encoder."""
import numpy as np
from numpy.testing import assert_allclose
from pytest import raises

from thermogest.errors import ConfigError, NumericError
from thermogest.model.encoder import (
    EncoderConfig,
    encode_frame,
    encode_frames,
    encoder_graph,
    prepare_frames,
    resize_frames,
    resize_matrix,
    resnet18_descriptor,
)
from thermogest.model.graph import init_params


def test_config() -> None:
    """Test the validation of the configuration."""
    cfg = EncoderConfig((16, 16), (24, 32), ((8, 2), (12, 1)))
    assert cfg.embedding_dim == 12
    assert EncoderConfig.from_dict(cfg.to_dict()) == cfg
    assert encoder_graph(cfg).layers[-1].out_shape == (12, )
    assert encoder_graph(cfg).layers[0].out_shape == (8, 8, 8)
    with raises(ConfigError):
        EncoderConfig(channels=())
    with raises(ConfigError):
        EncoderConfig(channels=((8, 3), ))
    with raises(ConfigError):
        EncoderConfig(input_size=(32, ))
    with raises(ValueError):
        EncoderConfig(frame_size=(0, 32))
    with raises(ConfigError):
        EncoderConfig.from_dict({"channel": [[8, 1]]})


def test_resize() -> None:
    """Bilinear resizing keeps constants and interpolates ramps."""
    for a, b in ((24, 32), (32, 24), (5, 5), (1, 4)):
        assert_allclose(resize_matrix(a, b).sum(axis=1), 1.0)
    frames = np.full((3, 24, 32), 7.5)
    assert_allclose(resize_frames(frames, (32, 32)), 7.5)
    ramp = np.tile(np.arange(32.0), (24, 1))
    out = resize_frames(ramp, (32, 16))
    assert out.shape == (32, 16)
    assert np.all(np.diff(out, axis=1) > 0.0)
    assert_allclose(np.diff(out, axis=0), 0.0, atol=1e-12)
    assert resize_frames(ramp, (24, 32)) is ramp


def test_prepare_frames() -> None:
    """Frames are checked, batched, and resized."""
    cfg = EncoderConfig()
    assert prepare_frames(np.zeros((24, 32)), cfg).shape == (1, 1, 32, 32)
    x = prepare_frames(np.zeros((5, 32, 32)), cfg, np.float64)
    assert (x.shape, x.dtype) == ((5, 1, 32, 32), np.float64)
    with raises(ConfigError):
        prepare_frames(np.zeros((5, 24, 30)), cfg)
    bad = np.zeros((2, 24, 32))
    bad[1, 3, 4] = np.inf
    with raises(NumericError):
        prepare_frames(bad, cfg)
    with raises(TypeError):
        prepare_frames([[0.0]], cfg)  # type: ignore[arg-type]


def test_frames_are_encoded_independently() -> None:
    """The embedding of a frame does not depend on the other frames."""
    cfg = EncoderConfig((16, 16), (24, 32), ((4, 2), (6, 2)))
    rng = np.random.default_rng(3)
    params = init_params(encoder_graph(cfg), rng, dtype=np.float64)
    frames = rng.normal(size=(4, 24, 32))
    emb = encode_frames(frames, cfg, params)
    assert emb.shape == (4, 6)
    assert np.all(emb >= 0.0)
    for i in range(4):
        assert_allclose(encode_frame(frames[i], cfg, params), emb[i],
                        rtol=1e-10)
        assert_allclose(encode_frame(frames[i][None], cfg, params),
                        emb[i], rtol=1e-10)


def test_resnet18_descriptor() -> None:
    """The counting graph has the expected geometry."""
    g = resnet18_descriptor(in_channels=3, classes=100, size=64)
    assert g.layers[0].in_shape == (3, 64, 64)
    assert g.layers[-1].out_shape == (100, )
    gap = resnet18_descriptor(classes=None).layers[-1]
    assert (gap.kind, gap.in_shape) == ("gap", (512, 4, 4))
    assert sum(1 for la in g.layers if la.kind == "conv2d") == 20
