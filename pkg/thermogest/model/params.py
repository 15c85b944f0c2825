"""
Named trainable parameters with gradients and optimizer state.

A :class:`ParamStore` maps unique parameter names to :class:`Parameter`
records. Iteration follows insertion order, which is the order of the
layers in the network graph, so every traversal is deterministic.

>>> import numpy as np
>>> ps = ParamStore()
>>> ps.add("a.w", np.zeros((2, 3), dtype=np.float32))
>>> ps.add("a.b", np.zeros(2, dtype=np.float32))
>>> ps.names()
('a.w', 'a.b')
>>> ps.size()
8
>>> "a.b" in ps
True
"""
from typing import Final, Iterator

import numpy as np
from pycommons.types import type_error

from thermogest.errors import ConfigError


class Parameter:
    """A trainable value blob with its gradient and Adam moments."""

    __slots__ = ("grad", "m", "v", "value")

    def __init__(self, value: np.ndarray) -> None:
        """
        Create the parameter.

        :param value: the initial value
        """
        if not isinstance(value, np.ndarray):
            raise type_error(value, "value", np.ndarray)
        #: the current value
        self.value: np.ndarray = value
        #: the accumulated gradient
        self.grad: np.ndarray = np.zeros_like(value)
        #: the first moment estimate of Adam
        self.m: np.ndarray = np.zeros_like(value)
        #: the second moment estimate of Adam
        self.v: np.ndarray = np.zeros_like(value)


class ParamStore:
    """An ordered collection of named parameters."""

    def __init__(self) -> None:
        """Create an empty parameter store."""
        #: the parameters by name
        self.__params: Final[dict[str, Parameter]] = {}
        #: the number of optimizer steps taken so far
        self.step: int = 0

    def add(self, name: str, value: np.ndarray) -> None:
        """
        Add a new parameter.

        :param name: the unique name
        :param value: the initial value
        """
        if not isinstance(name, str):
            raise type_error(name, "name", str)
        if name in self.__params:
            raise ConfigError(f"Duplicate parameter name {name!r}.")
        self.__params[name] = Parameter(value)

    def __contains__(self, name: object) -> bool:
        """
        Check whether a parameter exists.

        :param name: the name
        :return: `True` if the parameter exists
        """
        return name in self.__params

    def __len__(self) -> int:
        """
        Get the number of parameter blobs.

        :return: the number of parameter blobs
        """
        return len(self.__params)

    def __iter__(self) -> Iterator[tuple[str, Parameter]]:
        """
        Iterate over all names and parameters in insertion order.

        :return: the iterator
        """
        return iter(self.__params.items())

    def __getitem__(self, name: str) -> Parameter:
        """
        Get a parameter.

        :param name: the name
        :return: the parameter
        """
        if name not in self.__params:
            raise ConfigError(f"Unknown parameter {name!r}.")
        return self.__params[name]

    def value(self, name: str) -> np.ndarray:
        """
        Get the value of a parameter.

        :param name: the name
        :return: the value
        """
        return self[name].value

    def names(self) -> tuple[str, ...]:
        """
        Get the names of all parameters in insertion order.

        :return: the names
        """
        return tuple(self.__params.keys())

    def size(self) -> int:
        """
        Get the total number of scalar entries over all parameters.

        :return: the total number of scalar entries
        """
        return sum(p.value.size for p in self.__params.values())

    def zero_grad(self) -> None:
        """Reset all gradients to zero."""
        for p in self.__params.values():
            p.grad.fill(0)

    def snapshot(self) -> dict[str, np.ndarray]:
        """
        Copy all current values.

        :return: a dictionary of copies of the values
        """
        return {n: p.value.copy() for n, p in self.__params.items()}

    def restore(self, values: dict[str, np.ndarray]) -> None:
        """
        Overwrite the current values from a snapshot.

        :param values: the values by name, which must match exactly
        """
        if set(values.keys()) != set(self.__params.keys()):
            raise ConfigError("Snapshot does not match parameter names.")
        for n, p in self.__params.items():
            v = values[n]
            if v.shape != p.value.shape:
                raise ConfigError(f"Parameter {n!r} has shape "
                                  f"{p.value.shape}, got {v.shape}.")
            p.value[...] = v

    def astype(self, dtype: type) -> "ParamStore":
        """
        Create a copy of this store with values in another float type.

        Gradients and optimizer moments are reset in the copy.

        :param dtype: the new floating point type
        :return: the new store
        """
        result: Final[ParamStore] = ParamStore()
        for n, p in self.__params.items():
            result.add(n, p.value.astype(dtype))
        return result
