"""
Differentiable layer primitives with hand-written backward passes.

All tensors are :class:`numpy.ndarray` instances in row-major layout.
The functions preserve the floating point type of their inputs: networks
are evaluated in 32-bit floats, while gradient checks run the very same
code in 64-bit floats.

Spatial layers work on frames of shape `[C, H, W]` or on batches of shape
`[B, C, H, W]`. Temporal layers work on feature maps of shape `[C, T]` or
on batches of shape `[B, C, T]`. Padding is always zero padding.

>>> import numpy as np
>>> x = np.array([[1.0, 2.0, 3.0, 4.0]])
>>> w = np.ones((1, 1, 3))
>>> conv1d_dilated(x, w, None, 1, True).tolist()
[[1.0, 3.0, 6.0, 9.0]]
>>> conv1d_dilated(x, w, None, 1, False).tolist()
[[3.0, 6.0, 9.0, 7.0]]
>>> softmax(np.array([0.0, 0.0])).tolist()
[0.5, 0.5]
>>> relu(np.array([-1.0, 2.0])).tolist()
[0.0, 2.0]
"""
from typing import Callable, Final

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pycommons.types import check_int_range

from thermogest.errors import ConfigError, NumericError

#: the size of every temporal kernel
TEMPORAL_KERNEL: Final[int] = 3


def check_finite(x: np.ndarray, what: str) -> np.ndarray:
    """
    Make sure that an array contains only finite values.

    :param x: the array
    :param what: the name of the array, used in the error message
    :return: the array
    :raises NumericError: if the array contains NaN or infinite values

    >>> check_finite(np.zeros(2), "x").tolist()
    [0.0, 0.0]
    >>> try:
    ...     check_finite(np.array([1.0, np.nan]), "frame")
    ... except NumericError as ne:
    ...     print(ne)
    frame contains 1 non-finite value(s).
    """
    if not np.all(np.isfinite(x)):
        raise NumericError(
            f"{what} contains {int(np.sum(~np.isfinite(x)))} "
            "non-finite value(s).")
    return x


def __batched(x: np.ndarray, rank: int, what: str) -> tuple[
        np.ndarray, bool]:
    """
    Add a leading batch dimension to an unbatched input.

    :param x: the input
    :param rank: the rank of an unbatched input
    :param what: the name of the operation
    :return: the batched input and whether a dimension was added
    """
    if x.ndim == rank:
        return x[None], True
    if x.ndim == rank + 1:
        return x, False
    raise ConfigError(f"{what} needs {rank}- or {rank + 1}-dimensional "
                      f"input, but got shape {x.shape}.")


def _conv2d_geometry(x: np.ndarray, w: np.ndarray, stride: int) -> tuple[
        int, int, int]:
    """
    Check the shapes of a 2D convolution and compute its output size.

    :param x: the batched input of shape `[B, Cin, H, W]`
    :param w: the weights of shape `[Cout, Cin, k, k]`
    :param stride: the stride
    :return: the kernel size and the output height and width
    """
    if (w.ndim != 4) or (w.shape[2] != w.shape[3]) or (
            (w.shape[2] % 2) != 1):
        raise ConfigError(f"conv2d needs odd square kernels, got {w.shape}.")
    if w.shape[1] != x.shape[1]:
        raise ConfigError(f"conv2d weights {w.shape} do not fit "
                          f"input {x.shape}.")
    if stride not in {1, 2}:
        raise ConfigError(f"conv2d stride must be 1 or 2, got {stride}.")
    return (w.shape[2], -(-x.shape[2] // stride), -(-x.shape[3] // stride))


def _im2col(x: np.ndarray, k: int, stride: int, ho: int,
            wo: int) -> np.ndarray:
    """
    Unfold the zero-padded input into a column matrix.

    :param x: the batched input of shape `[B, Cin, H, W]`
    :param k: the kernel size
    :param stride: the stride
    :param ho: the output height
    :param wo: the output width
    :return: the matrix of shape `[B * ho * wo, Cin * k * k]`
    """
    p: Final[int] = k // 2
    xp: Final[np.ndarray] = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    win = sliding_window_view(xp, (k, k), axis=(2, 3))
    win = win[:, :, :(ho - 1) * stride + 1:stride,
              :(wo - 1) * stride + 1:stride]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(
        x.shape[0] * ho * wo, x.shape[1] * k * k)


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None,
           stride: int = 1) -> np.ndarray:
    """
    Apply a zero-padded 2D convolution.

    The padding is `k // 2`, so the output has `ceil(H / stride)` rows and
    `ceil(W / stride)` columns.

    :param x: the input of shape `[Cin, H, W]` or `[B, Cin, H, W]`
    :param w: the weights of shape `[Cout, Cin, k, k]`
    :param b: the bias of shape `[Cout]`, or `None`
    :param stride: the stride, `1` or `2`
    :return: the output of shape `[Cout, H', W']` or `[B, Cout, H', W']`

    >>> r = conv2d(np.ones((1, 3, 3)), np.ones((1, 1, 3, 3)), None)
    >>> r[0].tolist()
    [[4.0, 6.0, 4.0], [6.0, 9.0, 6.0], [4.0, 6.0, 4.0]]
    """
    xb, single = __batched(x, 3, "conv2d")
    k, ho, wo = _conv2d_geometry(xb, w, stride)
    cols: Final[np.ndarray] = _im2col(xb, k, stride, ho, wo)
    out = cols @ w.reshape(w.shape[0], -1).T
    if b is not None:
        out += b
    out = out.reshape(xb.shape[0], ho, wo, w.shape[0]).transpose(0, 3, 1, 2)
    out = np.ascontiguousarray(out)
    return out[0] if single else out


def conv2d_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray,
                    stride: int = 1) -> tuple[
        np.ndarray, np.ndarray, np.ndarray]:
    """
    Compute the gradients of a 2D convolution.

    :param x: the input that was fed to :func:`conv2d`
    :param w: the weights
    :param dy: the gradient with respect to the output
    :param stride: the stride
    :return: the gradients with respect to the input, weights, and bias
    """
    xb, single = __batched(x, 3, "conv2d")
    dyb: Final[np.ndarray] = dy[None] if single else dy
    k, ho, wo = _conv2d_geometry(xb, w, stride)
    bsz, cin, h, wd = xb.shape
    cout: Final[int] = w.shape[0]
    cols: Final[np.ndarray] = _im2col(xb, k, stride, ho, wo)
    dy2: Final[np.ndarray] = dyb.transpose(0, 2, 3, 1).reshape(-1, cout)
    dw: Final[np.ndarray] = (dy2.T @ cols).reshape(w.shape)
    db: Final[np.ndarray] = dy2.sum(axis=0)
    dcols = (dy2 @ w.reshape(cout, -1)).reshape(bsz, ho, wo, cin, k, k)
    p: Final[int] = k // 2
    dxp: Final[np.ndarray] = np.zeros(
        (bsz, cin, h + 2 * p, wd + 2 * p), dtype=dy.dtype)
    for i in range(k):
        for j in range(k):
            dxp[:, :, i:i + stride * (ho - 1) + 1:stride,
                j:j + stride * (wo - 1) + 1:stride] += \
                dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    dx = dxp[:, :, p:p + h, p:p + wd]
    return (dx[0] if single else dx), dw, db


def tap_offsets(dilation: int, causal: bool) -> tuple[int, int, int]:
    """
    Get the time offsets read by the three taps of a temporal kernel.

    The middle tap always reads the present frame. A non-causal kernel
    reads one frame `dilation` steps in the past and one in the future. A
    causal kernel reads the two past frames `2 * dilation` and `dilation`
    steps back instead.

    :param dilation: the dilation factor
    :param causal: is the kernel causal?
    :return: the offsets of kernel taps 0, 1, and 2

    >>> tap_offsets(2, False)
    (-2, 0, 2)
    >>> tap_offsets(2, True)
    (-4, 0, -2)
    """
    d: Final[int] = check_int_range(dilation, "dilation", 1, 1_000_000)
    return (-2 * d, 0, -d) if causal else (-d, 0, d)


def _shift(x: np.ndarray, offset: int) -> np.ndarray:
    """
    Shift a sequence in time with zero padding.

    :param x: the array whose last axis is time
    :param offset: the offset, the result at `t` is `x` at `t + offset`
    :return: the shifted array

    >>> _shift(np.array([1, 2, 3]), 1).tolist()
    [2, 3, 0]
    >>> _shift(np.array([1, 2, 3]), -2).tolist()
    [0, 0, 1]
    """
    if offset == 0:
        return x
    out: Final[np.ndarray] = np.zeros_like(x)
    t: Final[int] = x.shape[-1]
    if abs(offset) >= t:
        return out
    if offset > 0:
        out[..., :t - offset] = x[..., offset:]
    else:
        out[..., -offset:] = x[..., :t + offset]
    return out


def _check_temporal(x: np.ndarray, w: np.ndarray) -> None:
    """
    Check the shapes of a temporal convolution.

    :param x: the batched input of shape `[B, Cin, T]`
    :param w: the weights of shape `[Cout, Cin, 3]`
    """
    if (w.ndim != 3) or (w.shape[2] != TEMPORAL_KERNEL) or (
            w.shape[1] != x.shape[1]):
        raise ConfigError(f"temporal weights {w.shape} do not fit "
                          f"input {x.shape}.")


def conv1d_dilated(x: np.ndarray, w: np.ndarray, b: np.ndarray | None,
                   dilation: int, causal: bool) -> np.ndarray:
    """
    Apply a dilated temporal convolution with kernel size 3.

    The temporal length is preserved. See :func:`tap_offsets` for the
    frames read by each kernel tap.

    :param x: the input of shape `[Cin, T]` or `[B, Cin, T]`
    :param w: the weights of shape `[Cout, Cin, 3]`
    :param b: the bias of shape `[Cout]`, or `None`
    :param dilation: the dilation factor
    :param causal: `True` for a causal, `False` for a non-causal kernel
    :return: the output of shape `[Cout, T]` or `[B, Cout, T]`

    >>> x = np.array([[1.0, 2.0, 3.0, 4.0]])
    >>> conv1d_dilated(x, np.array([[[0.0, 1.0, 0.0]]]), None, 3,
    ...                True).tolist()
    [[1.0, 2.0, 3.0, 4.0]]
    """
    xb, single = __batched(x, 2, "conv1d_dilated")
    _check_temporal(xb, w)
    out: np.ndarray | None = None
    for j, off in enumerate(tap_offsets(dilation, causal)):
        part = w[:, :, j] @ _shift(xb, off)
        out = part if out is None else out + part
    if b is not None:
        out += b[:, None]
    return out[0] if single else out


def conv1d_dilated_backward(
        x: np.ndarray, w: np.ndarray, dy: np.ndarray, dilation: int,
        causal: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Compute the gradients of a dilated temporal convolution.

    :param x: the input that was fed to :func:`conv1d_dilated`
    :param w: the weights
    :param dy: the gradient with respect to the output
    :param dilation: the dilation factor
    :param causal: is the kernel causal?
    :return: the gradients with respect to the input, weights, and bias
    """
    xb, single = __batched(x, 2, "conv1d_dilated")
    _check_temporal(xb, w)
    dyb: Final[np.ndarray] = dy[None] if single else dy
    dx: np.ndarray = np.zeros_like(xb)
    dw: Final[np.ndarray] = np.zeros_like(w)
    for j, off in enumerate(tap_offsets(dilation, causal)):
        dw[:, :, j] = np.einsum("bot,bct->oc", dyb, _shift(xb, off))
        dx += _shift(w[:, :, j].T @ dyb, -off)
    db: Final[np.ndarray] = dyb.sum(axis=(0, 2))
    return (dx[0] if single else dx), dw, db


def conv1x1(x: np.ndarray, w: np.ndarray, b: np.ndarray | None) \
        -> np.ndarray:
    """
    Apply a pointwise (1x1) temporal convolution.

    :param x: the input of shape `[Cin, T]` or `[B, Cin, T]`
    :param w: the weights of shape `[Cout, Cin]`
    :param b: the bias of shape `[Cout]`, or `None`
    :return: the output of shape `[Cout, T]` or `[B, Cout, T]`

    >>> conv1x1(np.array([[1.0, 2.0]]), np.array([[2.0], [1.0]]),
    ...         np.array([0.0, 1.0])).tolist()
    [[2.0, 4.0], [2.0, 3.0]]
    """
    if (w.ndim != 2) or (x.ndim not in {2, 3}) or (
            w.shape[1] != x.shape[-2]):
        raise ConfigError(f"1x1 weights {w.shape} do not fit "
                          f"input {x.shape}.")
    out = w @ x
    if b is not None:
        out += b[:, None]
    return out


def conv1x1_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray) \
        -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Compute the gradients of a pointwise temporal convolution.

    :param x: the input that was fed to :func:`conv1x1`
    :param w: the weights
    :param dy: the gradient with respect to the output
    :return: the gradients with respect to the input, weights, and bias
    """
    if x.ndim == 2:
        return w.T @ dy, dy @ x.T, dy.sum(axis=1)
    return (w.T @ dy, np.einsum("bot,bct->oc", dy, x),
            dy.sum(axis=(0, 2)))


def relu(x: np.ndarray) -> np.ndarray:
    """
    Apply the rectified linear unit.

    :param x: the input
    :return: `max(x, 0)`
    """
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """
    Compute the gradient of the rectified linear unit.

    :param x: the input that was fed to :func:`relu`
    :param dy: the gradient with respect to the output
    :return: the gradient with respect to the input
    """
    return dy * (x > 0)


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    """
    Average each channel over all spatial positions.

    :param x: the input of shape `[C, H, W]` or `[B, C, H, W]`
    :return: the output of shape `[C]` or `[B, C]`

    >>> global_avg_pool(np.full((2, 3, 3), 1.5)).tolist()
    [1.5, 1.5]
    """
    return x.mean(axis=(-2, -1))


def global_avg_pool_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """
    Compute the gradient of the global average pool.

    :param x: the input that was fed to :func:`global_avg_pool`
    :param dy: the gradient with respect to the output
    :return: the gradient with respect to the input
    """
    n: Final[int] = x.shape[-1] * x.shape[-2]
    return np.broadcast_to(
        (dy / n)[..., None, None], x.shape).astype(x.dtype, copy=True)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """
    Compute the numerically stable softmax along an axis.

    :param x: the input
    :param axis: the axis to normalize
    :return: the probabilities
    """
    e: Final[np.ndarray] = np.exp(x - x.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(y: np.ndarray, dy: np.ndarray,
                     axis: int = -1) -> np.ndarray:
    """
    Compute the gradient of the softmax from its output.

    :param y: the output of :func:`softmax`
    :param dy: the gradient with respect to the output
    :param axis: the normalized axis
    :return: the gradient with respect to the input
    """
    return y * (dy - (dy * y).sum(axis=axis, keepdims=True))


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """
    Compute the numerically stable logarithm of the softmax.

    :param x: the input
    :param axis: the axis to normalize
    :return: the log-probabilities

    >>> np.round(np.exp(log_softmax(np.array([1.0, 1.0]))), 12).tolist()
    [0.5, 0.5]
    """
    s: Final[np.ndarray] = x - x.max(axis=axis, keepdims=True)
    return s - np.log(np.exp(s).sum(axis=axis, keepdims=True))


def log_softmax_backward(log_y: np.ndarray, dy: np.ndarray,
                         axis: int = -1) -> np.ndarray:
    """
    Compute the gradient of the log-softmax from its output.

    :param log_y: the output of :func:`log_softmax`
    :param dy: the gradient with respect to the output
    :param axis: the normalized axis
    :return: the gradient with respect to the input
    """
    return dy - np.exp(log_y) * dy.sum(axis=axis, keepdims=True)


def finite_difference_gradient(f: Callable[[np.ndarray], float],
                               x: np.ndarray,
                               h: float = 1e-5) -> np.ndarray:
    """
    Estimate the gradient of a scalar function by central differences.

    :param f: the function
    :param x: the point, a 64-bit array which is modified temporarily
    :param h: the step width
    :return: the estimated gradient

    >>> g = finite_difference_gradient(lambda v: float((v ** 2).sum()),
    ...                                np.array([1.0, -2.0]))
    >>> np.round(g, 6).tolist()
    [2.0, -4.0]
    """
    if x.dtype != np.float64:
        raise ConfigError(f"gradient checks need float64, got {x.dtype}.")
    grad: Final[np.ndarray] = np.zeros_like(x)
    flat: Final[np.ndarray] = x.reshape(-1)
    gflat: Final[np.ndarray] = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f(x)
        flat[i] = old - h
        down = f(x)
        flat[i] = old
        gflat[i] = (up - down) / (2.0 * h)
    return grad
