"""
The run configuration: one JSON file describing a complete experiment.

The file has four sections. `model` holds the `encoder` and the `tcn`
configuration, where the latter may also be the name of a preset. `train`
holds the training configuration including the `augment` magnitudes,
`data` the dataset location and the generator parameters, and
`evaluation` the settings of the detection experiments. Missing keys take
their defaults, unknown keys are errors.

>>> cfg = RunConfig.from_dict({"model": {"tcn": "mini"}})
>>> cfg.tcn.channels, cfg.train.window
(32, 48)
>>> RunConfig.from_dict(cfg.to_dict()) == cfg
True
"""
import json
from dataclasses import dataclass
from typing import Any, Final, Iterable

from pycommons.io.path import Path, file_path
from pycommons.types import check_int_range, type_error

from thermogest.data.generator import GeneratorParams
from thermogest.errors import ConfigError
from thermogest.inference.streaming import (
    DEFAULT_DELTA,
    DEFAULT_FLOOR,
    DEFAULT_HALF_LIFE,
    DEFAULT_WINDOW,
)
from thermogest.learning.training import TrainConfig
from thermogest.model.encoder import EncoderConfig
from thermogest.model.tcn import TcnConfig, preset


def _check_keys(data: Any, name: str, allowed: Iterable[str]) -> dict:
    """
    Make sure that a section is a dictionary without unknown keys.

    :param data: the section
    :param name: the section name
    :param allowed: the allowed keys
    :return: the section
    """
    if not isinstance(data, dict):
        raise type_error(data, name, dict)
    unknown: Final[set[str]] = set(data.keys()).difference(allowed)
    if unknown:
        raise ConfigError(f"Unknown {name} keys {sorted(unknown)}.")
    return data


@dataclass(frozen=True, init=False)
class DataConfig:
    """Where the dataset lives and how it is generated."""

    #: the dataset directory
    directory: str
    #: the number of clips to generate
    clips: int
    #: the seed of the dataset
    seed: int
    #: the number of classes, including the non-gesture class
    classes: int
    #: the generator parameters
    generator: GeneratorParams

    def __init__(self, directory: str = "data", clips: int = 600,
                 seed: int = 0, classes: int = 10,
                 generator: GeneratorParams | None = None) -> None:
        """
        Create the data configuration.

        :param directory: the dataset directory
        :param clips: the number of clips
        :param seed: the seed
        :param classes: the number of classes
        :param generator: the generator parameters, `None` for defaults
        """
        if not isinstance(directory, str):
            raise type_error(directory, "directory", str)
        if not directory.strip():
            raise ConfigError("The data directory must not be empty.")
        object.__setattr__(self, "directory", directory.strip())
        object.__setattr__(self, "clips", check_int_range(
            clips, "clips", 10, 10_000_000))
        object.__setattr__(self, "seed", check_int_range(
            seed, "seed", 0, 2 ** 63 - 1))
        object.__setattr__(self, "classes", check_int_range(
            classes, "classes", 2, 10))
        if generator is None:
            generator = GeneratorParams()
        elif not isinstance(generator, GeneratorParams):
            raise type_error(generator, "generator", GeneratorParams)
        object.__setattr__(self, "generator", generator)

    def to_dict(self) -> dict[str, Any]:
        """
        Convert this configuration to a JSON-compatible dictionary.

        :return: the dictionary
        """
        return {"directory": self.directory, "clips": self.clips,
                "seed": self.seed, "classes": self.classes,
                "generator": self.generator.to_dict()}

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "DataConfig":
        """
        Load a data configuration from a dictionary.

        :param data: the dictionary
        :return: the configuration
        """
        args: Final[dict[str, Any]] = dict(_check_keys(
            data, "data", DataConfig().to_dict()))
        if "generator" in args:
            args["generator"] = GeneratorParams.from_dict(args["generator"])
        return DataConfig(**args)


@dataclass(frozen=True, init=False)
class EvalConfig:
    """The settings of the streaming and detection experiments."""

    #: the output offsets of the detection sweep
    deltas: tuple[int, ...]
    #: the output offset of single streaming runs
    delta: int
    #: the lowest probability of a detection
    floor: float
    #: the number of frames of the streaming window
    window: int
    #: the fraction of test clips stitched into the test video
    fraction: float
    #: the seed of the test video
    seed: int
    #: the half-life of the running normalization in frames
    half_life: float

    def __init__(self, deltas: Iterable[int] = tuple(range(24)),
                 delta: int = DEFAULT_DELTA, floor: float = DEFAULT_FLOOR,
                 window: int = DEFAULT_WINDOW, fraction: float = 0.5,
                 seed: int = 0,
                 half_life: float = DEFAULT_HALF_LIFE) -> None:
        """
        Create the evaluation configuration.

        :param deltas: the output offsets of the detection sweep
        :param delta: the output offset of single streaming runs
        :param floor: the lowest probability of a detection
        :param window: the streaming window length
        :param fraction: the fraction of stitched test clips
        :param seed: the seed of the test video
        :param half_life: the half-life of the running normalization
        """
        object.__setattr__(self, "window", check_int_range(
            window, "window", 1, 1_000_000))
        ds: Final[tuple[int, ...]] = tuple(
            check_int_range(d, "delta", 0, window - 1) for d in deltas)
        if not ds:
            raise ConfigError("The delta sweep must not be empty.")
        object.__setattr__(self, "deltas", ds)
        object.__setattr__(self, "delta", check_int_range(
            delta, "delta", 0, window - 1))
        if not 0.0 <= floor <= 1.0:
            raise ConfigError(f"floor must be in [0, 1], got {floor}.")
        object.__setattr__(self, "floor", float(floor))
        if not 0.0 < fraction <= 1.0:
            raise ConfigError(f"fraction must be in (0, 1], got {fraction}.")
        object.__setattr__(self, "fraction", float(fraction))
        object.__setattr__(self, "seed", check_int_range(
            seed, "seed", 0, 2 ** 63 - 1))
        if not half_life > 0.0:
            raise ConfigError(
                f"half_life must be positive, got {half_life}.")
        object.__setattr__(self, "half_life", float(half_life))

    def to_dict(self) -> dict[str, Any]:
        """
        Convert this configuration to a JSON-compatible dictionary.

        :return: the dictionary
        """
        return {"deltas": list(self.deltas), "delta": self.delta,
                "floor": self.floor, "window": self.window,
                "fraction": self.fraction, "seed": self.seed,
                "half_life": self.half_life}

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "EvalConfig":
        """
        Load an evaluation configuration from a dictionary.

        :param data: the dictionary
        :return: the configuration

        >>> EvalConfig.from_dict({"deltas": [0, 1, 5]}).deltas
        (0, 1, 5)
        """
        return EvalConfig(**_check_keys(
            data, "evaluation", EvalConfig().to_dict()))


@dataclass(frozen=True, init=False)
class RunConfig:
    """The complete configuration of an experiment."""

    #: the encoder configuration
    encoder: EncoderConfig
    #: the temporal network configuration
    tcn: TcnConfig
    #: the training configuration
    train: TrainConfig
    #: the data configuration
    data: DataConfig
    #: the evaluation configuration
    evaluation: EvalConfig

    def __init__(self, encoder: EncoderConfig | None = None,
                 tcn: TcnConfig | None = None,
                 train: TrainConfig | None = None,
                 data: DataConfig | None = None,
                 evaluation: EvalConfig | None = None) -> None:
        """
        Create the run configuration.

        :param encoder: the encoder, `None` for the default mini encoder
        :param tcn: the temporal network, `None` for the `mini` preset
        :param train: the training configuration
        :param data: the data configuration
        :param evaluation: the evaluation configuration
        """
        for name, value, kind, default in (
                ("encoder", encoder, EncoderConfig, EncoderConfig),
                ("tcn", tcn, TcnConfig, lambda: preset("mini")),
                ("train", train, TrainConfig, TrainConfig),
                ("data", data, DataConfig, DataConfig),
                ("evaluation", evaluation, EvalConfig, EvalConfig)):
            if value is None:
                value = default()
            elif not isinstance(value, kind):
                raise type_error(value, name, kind)
            object.__setattr__(self, name, value)

    def to_dict(self) -> dict[str, Any]:
        """
        Convert this configuration to a JSON-compatible dictionary.

        :return: the dictionary
        """
        return {"model": {"encoder": self.encoder.to_dict(),
                          "tcn": self.tcn.to_dict()},
                "train": self.train.to_dict(),
                "data": self.data.to_dict(),
                "evaluation": self.evaluation.to_dict()}

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "RunConfig":
        """
        Load a run configuration from a dictionary.

        :param data: the dictionary
        :return: the configuration
        """
        _check_keys(data, "run", ("model", "train", "data", "evaluation"))
        model: Final[dict] = _check_keys(
            data.get("model", {}), "model", ("encoder", "tcn"))
        return RunConfig(
            EncoderConfig.from_dict(model["encoder"])
            if "encoder" in model else None,
            TcnConfig.from_dict(model["tcn"]) if "tcn" in model else None,
            TrainConfig.from_dict(data["train"]) if "train" in data
            else None,
            DataConfig.from_dict(data["data"]) if "data" in data else None,
            EvalConfig.from_dict(data["evaluation"])
            if "evaluation" in data else None)

    def to_json(self) -> str:
        """
        Convert this configuration to JSON text.

        :return: the indented JSON text
        """
        return json.dumps(self.to_dict(), indent=2)


def parse_config(text: str, what: str = "config") -> RunConfig:
    """
    Parse a run configuration from JSON text.

    :param text: the JSON text
    :param what: the source name, for error messages
    :return: the configuration
    :raises ConfigError: if the text is not valid JSON

    >>> try:
    ...     parse_config('{"train": {\\n "epochs": }}')
    ... except ConfigError as ce:
    ...     print(ce)
    Malformed config: Expecting value in line 2, column 12.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as je:
        raise ConfigError(f"Malformed {what}: {je.msg} in line {je.lineno},"
                          f" column {je.colno}.") from je
    return RunConfig.from_dict(data)


def load_config(path: str | None) -> RunConfig:
    """
    Load a run configuration file.

    :param path: the path to the file, or `None` for the defaults
    :return: the configuration
    """
    if path is None:
        return RunConfig()
    src: Final[Path] = file_path(path)
    return parse_config(src.read_all_str(), repr(src))
