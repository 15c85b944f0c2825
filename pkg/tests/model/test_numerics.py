"""Test the layer primitives and their backward passes."""

from typing import Final

import numpy as np
import pytest
from numpy.testing import assert_allclose

from thermogest.errors import ConfigError, NumericError
from thermogest.model import numerics as nm


def test_conv1d_taps() -> None:
    """Test which frames the taps of a temporal kernel read."""
    x: Final[np.ndarray] = np.arange(1.0, 9.0)[None]
    for causal in (False, True):
        for d in (1, 2, 4):
            for j, off in enumerate(nm.tap_offsets(d, causal)):
                w = np.zeros((1, 1, 3))
                w[0, 0, j] = 1.0
                y = nm.conv1d_dilated(x, w, None, d, causal)[0]
                for t in range(x.shape[1]):
                    src = t + off
                    expected = x[0, src] if 0 <= src < x.shape[1] else 0.0
                    assert y[t] == expected
            if causal:
                assert max(nm.tap_offsets(d, causal)) == 0


def check_conv1d(rng: np.random.Generator, causal: bool) -> None:
    """
    Check the temporal convolution gradients by central differences.

    :param rng: the random number generator
    :param causal: is the convolution causal?
    """
    x: Final[np.ndarray] = rng.standard_normal((2, 3, 9))
    w: Final[np.ndarray] = rng.standard_normal((4, 3, 3))
    b: Final[np.ndarray] = rng.standard_normal(4)
    r: Final[np.ndarray] = rng.standard_normal((2, 4, 9))
    dx, dw, db = nm.conv1d_dilated_backward(x, w, r, 2, causal)

    def loss(_: np.ndarray) -> float:
        return float(np.sum(nm.conv1d_dilated(x, w, b, 2, causal) * r))

    for got, at in ((dx, x), (dw, w), (db, b)):
        assert_allclose(got, nm.finite_difference_gradient(loss, at),
                        rtol=1e-6, atol=1e-7)


def test_conv1d_gradient() -> None:
    """Check the temporal convolution gradients."""
    rng: Final[np.random.Generator] = np.random.default_rng(1)
    check_conv1d(rng, False)
    check_conv1d(rng, True)


def check_conv2d(rng: np.random.Generator, stride: int) -> None:
    """
    Check the 2D convolution gradients by central differences.

    :param rng: the random number generator
    :param stride: the stride
    """
    x: Final[np.ndarray] = rng.standard_normal((2, 2, 5, 6))
    w: Final[np.ndarray] = rng.standard_normal((3, 2, 3, 3))
    b: Final[np.ndarray] = rng.standard_normal(3)
    y: Final[np.ndarray] = nm.conv2d(x, w, b, stride)
    assert y.shape == (2, 3, -(-5 // stride), -(-6 // stride))
    r: Final[np.ndarray] = rng.standard_normal(y.shape)
    dx, dw, db = nm.conv2d_backward(x, w, r, stride)

    def loss(_: np.ndarray) -> float:
        return float(np.sum(nm.conv2d(x, w, b, stride) * r))

    for got, at in ((dx, x), (dw, w), (db, b)):
        assert_allclose(got, nm.finite_difference_gradient(loss, at),
                        rtol=1e-6, atol=1e-7)


def test_conv2d_gradient() -> None:
    """Check the 2D convolution gradients with both strides."""
    rng: Final[np.random.Generator] = np.random.default_rng(2)
    check_conv2d(rng, 1)
    check_conv2d(rng, 2)


def test_conv2d_unbatched() -> None:
    """Make sure that single frames and batches give the same result."""
    rng: Final[np.random.Generator] = np.random.default_rng(3)
    x: Final[np.ndarray] = rng.standard_normal((1, 6, 6))
    w: Final[np.ndarray] = rng.standard_normal((2, 1, 3, 3))
    assert_allclose(nm.conv2d(x, w, None, 2),
                    nm.conv2d(x[None], w, None, 2)[0])


def test_softmax_gradients() -> None:
    """Check the softmax and log-softmax gradients."""
    rng: Final[np.random.Generator] = np.random.default_rng(4)
    x: Final[np.ndarray] = rng.standard_normal((3, 5))
    r: Final[np.ndarray] = rng.standard_normal((3, 5))
    y: Final[np.ndarray] = nm.softmax(x, axis=1)
    assert_allclose(y.sum(axis=1), np.ones(3))
    assert_allclose(
        nm.softmax_backward(y, r, axis=1),
        nm.finite_difference_gradient(
            lambda v: float(np.sum(nm.softmax(v, axis=1) * r)), x),
        rtol=1e-6, atol=1e-8)
    assert_allclose(
        nm.log_softmax_backward(nm.log_softmax(x, axis=1), r, axis=1),
        nm.finite_difference_gradient(
            lambda v: float(np.sum(nm.log_softmax(v, axis=1) * r)), x),
        rtol=1e-6, atol=1e-8)


def test_softmax_large_inputs() -> None:
    """Make sure that huge logits do not overflow."""
    y: Final[np.ndarray] = nm.softmax(np.array([1000.0, 0.0, -1000.0]))
    assert np.all(np.isfinite(y))
    assert_allclose(y, [1.0, 0.0, 0.0])


def test_errors() -> None:
    """Test the error handling of the primitives."""
    with pytest.raises(NumericError):
        nm.check_finite(np.array([np.inf]), "x")
    with pytest.raises(ConfigError):
        nm.conv1d_dilated(np.ones((2, 5)), np.ones((1, 3, 3)), None, 1, True)
    with pytest.raises(ConfigError):
        nm.finite_difference_gradient(lambda v: 0.0, np.ones(2, np.float32))
