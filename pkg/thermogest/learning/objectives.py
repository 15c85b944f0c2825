"""
The training losses and the decoders of the per-frame outputs.

The non-gesture class `0` doubles as the blank symbol of the
connectionist temporal classification (CTC) loss. A clip without gesture
has the empty target sequence, a clip with one gesture of class `l` has
the target `(l, )`, and a clip with two gestures has the target `(l, l)`.

The CTC loss is computed with the forward-backward recursion over the
target extended by blanks, entirely in the log domain with max-shifted
sums.

>>> import numpy as np
>>> lp = np.log(np.array([[0.6, 0.4], [0.3, 0.7]]))
>>> round(ctc_loss(lp, (1, ))[0], 4)
0.1985
>>> round(ctc_loss(lp, ())[0], 4)
1.7148
>>> best_path_decode(np.array([[0.9, 0.1], [0.2, 0.8], [0.3, 0.7]]))
[(1, 0.8)]
"""
from typing import Final, Iterable

import numpy as np

from thermogest.data.clip import check_index
from thermogest.errors import DataError, InfeasibleTargetError
from thermogest.model import numerics as nm
from thermogest.model.tcn import NON_GESTURE

#: the name of the cross-entropy loss on time-averaged logits
LOSS_CE: Final[str] = "ce"
#: the name of the connectionist temporal classification loss
LOSS_CTC: Final[str] = "ctc"
#: all loss names
LOSSES: Final[tuple[str, ...]] = (LOSS_CE, LOSS_CTC)


def ce_clip_loss(logits: np.ndarray, label: int) -> tuple[
        float, np.ndarray]:
    """
    Compute the cross-entropy of the time-averaged logits.

    :param logits: the per-frame logits of shape `[T, P]`
    :param label: the class of the clip
    :return: the loss and its gradient with respect to the logits, which
        is the same for every frame

    >>> loss, g = ce_clip_loss(np.zeros((1, 2)), 0)
    >>> round(loss, 4), np.round(g, 6).tolist()
    (0.6931, [[-0.5, 0.5]])
    """
    if (logits.ndim != 2) or (logits.shape[0] < 1):
        raise DataError(f"Logits must have shape [T, P], got {logits.shape}.")
    t, p = logits.shape
    label = check_index(label, "label", 0, p - 1)
    mean: Final[np.ndarray] = logits.mean(axis=0)
    log_y: Final[np.ndarray] = nm.log_softmax(mean)
    dmean: Final[np.ndarray] = np.exp(log_y)
    dmean[label] -= 1.0
    return float(-log_y[label]), np.broadcast_to(
        dmean / t, logits.shape).astype(logits.dtype, copy=True)


def classify_ce(logits: np.ndarray) -> int:
    """
    Classify a clip by its time-averaged logits.

    :param logits: the per-frame logits of shape `[T, P]`
    :return: the class with the largest averaged logit
    """
    return int(np.argmax(logits.mean(axis=0)))


def extend_target(target: tuple[int, ...], blank: int = NON_GESTURE) \
        -> tuple[np.ndarray, np.ndarray]:
    """
    Interleave a target with blanks and find the allowed skips.

    :param target: the target sequence
    :param blank: the blank index
    :return: the extended sequence and, for each of its positions, whether
        it may be entered from two positions before

    >>> e, s = extend_target((3, 3))
    >>> e.tolist(), s.tolist()
    ([0, 3, 0, 3, 0], [False, False, False, False, False])
    >>> extend_target((2, 3))[1].tolist()
    [False, False, False, True, False]
    """
    ext: Final[np.ndarray] = np.full(2 * len(target) + 1, blank, dtype=int)
    ext[1::2] = target
    skip: Final[np.ndarray] = np.zeros(ext.size, dtype=bool)
    skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    return ext, skip


def min_frames(target: tuple[int, ...]) -> int:
    """
    Get the fewest frames a target sequence can be aligned to.

    :param target: the target sequence
    :return: the length plus the number of adjacent repeats

    >>> min_frames(()), min_frames((1, )), min_frames((1, 1))
    (0, 1, 3)
    """
    return len(target) + sum(1 for a, b in zip(
        target, target[1:]) if a == b)


def _logsumexp(a: np.ndarray, axis: int = 0) -> np.ndarray:
    """
    Compute `log(sum(exp(a)))` with a max shift.

    :param a: the values in the log domain
    :param axis: the axis to reduce
    :return: the reduced values, `-inf` where all inputs are `-inf`
    """
    m: Final[np.ndarray] = np.max(a, axis=axis, keepdims=True)
    safe: Final[np.ndarray] = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        res = np.log(np.sum(np.exp(a - safe), axis=axis, keepdims=True))
    return np.squeeze(res + safe, axis=axis)


def _shift_right(a: np.ndarray, k: int) -> np.ndarray:
    """
    Move values to higher positions, filling with `-inf`.

    :param a: the vector
    :param k: the distance
    :return: the moved vector
    """
    out: Final[np.ndarray] = np.full_like(a, -np.inf)
    out[k:] = a[:a.size - k]
    return out


def ctc_loss(log_probs: np.ndarray, target: Iterable[int],
             blank: int = NON_GESTURE) -> tuple[float, np.ndarray]:
    """
    Compute the CTC loss and its gradient.

    :param log_probs: the per-frame log-probabilities of shape `[T, P]`
    :param target: the target sequence, without blanks
    :param blank: the blank index
    :return: the negative log-likelihood of all alignments and its gradient
        with respect to `log_probs`
    :raises InfeasibleTargetError: if there are too few frames for the
        target

    >>> lp = np.log(np.full((2, 2), 0.5))
    >>> try:
    ...     ctc_loss(lp, (1, 1))
    ... except InfeasibleTargetError as ie:
    ...     print(ie)
    Target (1, 1) needs at least 3 frames, got 2.
    """
    t_len, n_classes = log_probs.shape
    blank = check_index(blank, "blank", 0, n_classes - 1)
    tgt: Final[tuple[int, ...]] = tuple(
        check_index(lb, "label", 0, n_classes - 1) for lb in target)
    for lb in tgt:
        if lb == blank:
            raise DataError(f"Target {tgt} contains the blank {blank}.")
    if t_len < max(1, min_frames(tgt)):
        raise InfeasibleTargetError(
            f"Target {tgt} needs at least {min_frames(tgt)} frames, "
            f"got {t_len}.")
    ext, skip = extend_target(tgt, blank)
    s_len: Final[int] = ext.size
    lp: Final[np.ndarray] = log_probs.astype(np.float64)[:, ext]

    alpha: Final[np.ndarray] = np.full((t_len, s_len), -np.inf)
    alpha[0, 0] = lp[0, 0]
    if s_len > 1:
        alpha[0, 1] = lp[0, 1]
    for t in range(1, t_len):
        prev = alpha[t - 1]
        hop = np.where(skip, _shift_right(prev, 2), -np.inf)
        alpha[t] = _logsumexp(np.stack(
            (prev, _shift_right(prev, 1), hop))) + lp[t]

    beta: Final[np.ndarray] = np.full((t_len, s_len), -np.inf)
    beta[-1, -1] = 0.0
    if s_len > 1:
        beta[-1, -2] = 0.0
    for t in range(t_len - 2, -1, -1):
        nxt = beta[t + 1] + lp[t + 1]
        down1 = np.full(s_len, -np.inf)
        down1[:-1] = nxt[1:]
        down2 = np.full(s_len, -np.inf)
        down2[:-2] = np.where(skip[2:], nxt[2:], -np.inf)
        beta[t] = _logsumexp(np.stack((nxt, down1, down2)))

    log_p: Final[float] = float(_logsumexp(alpha[-1, -2:] if s_len > 1
                                           else alpha[-1, -1:]))
    if not np.isfinite(log_p):
        raise InfeasibleTargetError(f"Target {tgt} has zero probability.")
    occupancy: Final[np.ndarray] = np.exp(alpha + beta - log_p)
    grad: Final[np.ndarray] = np.zeros((t_len, n_classes))
    for s in range(s_len):
        grad[:, ext[s]] -= occupancy[:, s]
    return -log_p, grad.astype(log_probs.dtype)


def ctc_logits_loss(logits: np.ndarray, target: Iterable[int],
                    blank: int = NON_GESTURE) -> tuple[float, np.ndarray]:
    """
    Compute the CTC loss of per-frame logits.

    :param logits: the per-frame logits of shape `[T, P]`
    :param target: the target sequence
    :param blank: the blank index
    :return: the loss and its gradient with respect to the logits
    """
    log_y: Final[np.ndarray] = nm.log_softmax(
        logits.astype(np.float64), axis=1)
    loss, dlp = ctc_loss(log_y, target, blank)
    return loss, nm.log_softmax_backward(log_y, dlp, axis=1).astype(
        logits.dtype)


def derive_target(labels: Iterable[int],
                  blank: int = NON_GESTURE) -> tuple[int, ...]:
    """
    Derive the CTC target sequence from the labels of a clip.

    :param labels: the label sequence of the clip
    :param blank: the index of the non-gesture class
    :return: `()`, `(l, )`, or `(l, l)`
    :raises DataError: for any other label pattern

    >>> derive_target([]), derive_target([4]), derive_target([2, 2])
    ((), (4,), (2, 2))
    """
    lbl: Final[tuple[int, ...]] = tuple(
        int(lb) for lb in labels if lb != blank)
    if (len(lbl) > 2) or ((len(lbl) == 2) and (lbl[0] != lbl[1])):
        raise DataError(f"Unsupported label pattern {tuple(labels)}.")
    return lbl


def best_path_decode(probs: np.ndarray, blank: int = NON_GESTURE) \
        -> list[tuple[int, float]]:
    """
    Decode the most likely path: collapse repeats and drop blanks.

    Ties in the per-frame maximum go to the lowest class index.

    :param probs: the probability sequence of shape `[T, P]`
    :param blank: the blank index
    :return: the decoded labels, each with the largest probability of its
        run

    >>> p = np.eye(3)[[0, 1, 1, 0, 2]]
    >>> [lb for lb, _ in best_path_decode(p)]
    [1, 2]
    >>> [lb for lb, _ in best_path_decode(np.eye(2)[[1, 1, 0, 1]])]
    [1, 1]
    """
    path: Final[np.ndarray] = np.argmax(probs, axis=1)
    result: Final[list[tuple[int, float]]] = []
    prev: int = -1
    for t, k in enumerate(path.tolist()):
        score = float(probs[t, k])
        if k == prev:
            if k != blank:
                result[-1] = (k, max(result[-1][1], score))
        elif k != blank:
            result.append((k, score))
        prev = k
    return result


def classify_ctc(probs: np.ndarray, blank: int = NON_GESTURE) -> int:
    """
    Classify a clip by the decoded label with the highest score.

    :param probs: the probability sequence of shape `[T, P]`
    :param blank: the index of the non-gesture class
    :return: the class, `blank` if nothing was decoded

    >>> classify_ctc(np.array([[0.4, 0.6, 0.0], [0.1, 0.0, 0.9]]))
    2
    >>> classify_ctc(np.array([[0.9, 0.1]]))
    0
    """
    decoded: Final[list[tuple[int, float]]] = best_path_decode(probs, blank)
    if not decoded:
        return blank
    best: tuple[int, float] = decoded[0]
    for d in decoded[1:]:
        if d[1] > best[1]:
            best = d
    return best[0]
