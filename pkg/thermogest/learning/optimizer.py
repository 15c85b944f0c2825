"""
The Adam optimizer and the plateau learning rate schedule.

>>> import numpy as np
>>> ps = ParamStore()
>>> ps.add("w", np.zeros(1))
>>> ps["w"].grad[:] = 1.0
>>> adam_step(ps, 0.01)
>>> round(float(ps.value("w")[0]), 6)
-0.01
"""
from math import sqrt
from typing import Any, Final

import numpy as np
from pycommons.types import check_int_range, type_error

from thermogest.errors import ConfigError, NumericError
from thermogest.model.params import ParamStore


def adam_step(params: ParamStore, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """
    Apply one Adam update with bias correction to all parameters.

    The step counter of the parameter store is incremented and the
    gradients are left untouched.

    :param params: the parameters with populated gradients
    :param lr: the learning rate
    :param beta1: the decay of the first moment
    :param beta2: the decay of the second moment
    :param eps: the term added to the denominator
    :raises NumericError: if a gradient is not finite
    """
    if not lr > 0.0:
        raise ConfigError(f"Learning rate must be positive, got {lr}.")
    for name, p in params:
        if not np.all(np.isfinite(p.grad)):
            raise NumericError(f"Gradient of {name!r} contains "
                               f"{int(np.sum(~np.isfinite(p.grad)))} "
                               "non-finite value(s).")
    params.step += 1
    t: Final[int] = params.step
    c1: Final[float] = 1.0 - beta1 ** t
    c2: Final[float] = 1.0 - beta2 ** t
    step: Final[float] = lr * sqrt(c2) / c1
    for _, p in params:
        p.m *= beta1
        p.m += (1.0 - beta1) * p.grad
        p.v *= beta2
        p.v += (1.0 - beta2) * np.square(p.grad)
        p.value -= step * p.m / (np.sqrt(p.v) + eps * sqrt(c2))


class PlateauScheduler:
    """
    Reduce the learning rate when a monitored accuracy stops improving.

    >>> s = PlateauScheduler(1.0, patience=2, factor=0.1)
    >>> [round(s.update(a), 6) for a in (0.5, 0.5, 0.4, 0.6, 0.6, 0.6)]
    [1.0, 1.0, 0.1, 0.1, 0.1, 0.01]
    """

    def __init__(self, lr: float, patience: int = 20,
                 factor: float = 0.1) -> None:
        """
        Create the scheduler.

        :param lr: the initial learning rate
        :param patience: the number of epochs without improvement after
            which the learning rate is reduced
        :param factor: the reduction factor
        """
        if not lr > 0.0:
            raise ConfigError(f"Learning rate must be positive, got {lr}.")
        if not 0.0 < factor < 1.0:
            raise ConfigError(f"Factor must be in (0, 1), got {factor}.")
        #: the current learning rate
        self.lr: float = float(lr)
        #: the patience
        self.patience: Final[int] = check_int_range(
            patience, "patience", 1, 1_000_000)
        #: the reduction factor
        self.factor: Final[float] = float(factor)
        #: the best accuracy so far
        self.best: float = -1.0
        #: the number of epochs since the last improvement
        self.stale: int = 0

    def update(self, accuracy: float) -> float:
        """
        Register the accuracy of an epoch.

        :param accuracy: the monitored accuracy
        :return: the learning rate for the next epoch
        """
        if accuracy > self.best:
            self.best = accuracy
            self.stale = 0
        else:
            self.stale += 1
            if self.stale >= self.patience:
                self.lr *= self.factor
                self.stale = 0
        return self.lr

    def state(self) -> dict[str, Any]:
        """
        Get the state of the scheduler.

        :return: a JSON-compatible dictionary
        """
        return {"lr": self.lr, "best": self.best, "stale": self.stale}

    def restore(self, state: dict[str, Any]) -> None:
        """
        Restore a state obtained from :meth:`state`.

        :param state: the state
        """
        if not isinstance(state, dict):
            raise type_error(state, "state", dict)
        self.lr = float(state["lr"])
        self.best = float(state["best"])
        self.stale = int(state["stale"])
