"""
The top-1 classification score of whole clips.

A clip is classified either by its time-averaged logits, as during
cross-entropy training, or by best-path decoding of its probability
sequence, as during CTC training. Both work on the per-clip normalized
frames.

>>> round(seed_average([0.9, 0.8, 1.0]), 6)
0.9
"""
from typing import Callable, Final, Iterable

import numpy as np
from pycommons.types import type_error

from thermogest.data.clip import ThermalClip
from thermogest.data.preprocess import normalize_frames
from thermogest.errors import ConfigError, DataError
from thermogest.learning.objectives import (
    LOSS_CE,
    LOSS_CTC,
    LOSSES,
    classify_ce,
    classify_ctc,
)
from thermogest.model import numerics as nm
from thermogest.model.network import GestureNet

#: a function assigning a class to a clip
Classifier = Callable[[ThermalClip], int]


def predict_class(net: GestureNet, clip: ThermalClip,
                  mode: str = LOSS_CE) -> int:
    """
    Classify one clip with a network.

    :param net: the network
    :param clip: the clip in Celsius
    :param mode: `ce` for averaged logits or `ctc` for best-path decoding
    :return: the predicted class
    """
    logits: Final[np.ndarray] = net.window_logits(
        net.embed(normalize_frames(clip.frames)))
    if mode == LOSS_CE:
        return classify_ce(logits)
    if mode == LOSS_CTC:
        return classify_ctc(nm.softmax(logits, axis=1))
    raise ConfigError(f"Unknown mode {mode!r}, must be one of {LOSSES}.")


def top1_accuracy(model: GestureNet | Classifier,
                  clips: Iterable[ThermalClip],
                  mode: str = LOSS_CE) -> float:
    """
    Compute the fraction of correctly classified clips.

    :param model: a network or any function mapping a clip to its class
    :param clips: the clips
    :param mode: the classification mode used for networks
    :return: the top-1 accuracy
    :raises DataError: if there are no clips

    >>> clips = [ThermalClip(np.zeros((2, 2, 2)), (c, )) for c in (1, 2)]
    >>> top1_accuracy(lambda c: c.cls, clips)
    1.0
    >>> top1_accuracy(lambda c: 1, clips)
    0.5
    """
    if isinstance(model, GestureNet):
        net: Final[GestureNet] = model
        if mode not in LOSSES:
            raise ConfigError(
                f"Unknown mode {mode!r}, must be one of {LOSSES}.")

        def classify(clip: ThermalClip) -> int:
            """
            Classify a clip with the network.

            :param clip: the clip
            :return: the predicted class
            """
            return predict_class(net, clip, mode)
    elif callable(model):
        classify = model
    else:
        raise type_error(model, "model", GestureNet, call=True)
    total: int = 0
    correct: int = 0
    for clip in clips:
        total += 1
        if classify(clip) == clip.cls:
            correct += 1
    if total <= 0:
        raise DataError("Cannot compute the accuracy of an empty test set.")
    return correct / total


def seed_average(accuracies: Iterable[float]) -> float:
    """
    Average the accuracies of runs with different seeds.

    :param accuracies: the accuracy of each run
    :return: the arithmetic mean
    :raises DataError: if there are no runs
    """
    values: Final[list[float]] = list(accuracies)
    if not values:
        raise DataError("No accuracies to average.")
    return float(np.mean(values))
