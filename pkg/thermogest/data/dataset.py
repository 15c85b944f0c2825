"""
Synthetic datasets of thermal clips and their manifests.

:func:`build_dataset` generates `n` clips into a directory, one container
file per clip, and writes a manifest with one JSON record per line. Clip
`i` has the class `i % n_classes`, so the classes are balanced, and is
generated from the random stream `(seed, i)`. A seeded permutation puts
70% of the clips into the training split and the rest into the test
split.

A :class:`ClipSource` provides the clips of a split. The
:class:`ManifestSource` reads them from a manifest. Readers for other
datasets can implement the same interface.
"""
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Final, Iterable

import numpy as np
from pycommons.io.console import logger
from pycommons.io.path import Path, file_path, write_lines
from pycommons.types import check_int_range, type_error

from thermogest.data.clip import N_CLASSES, ThermalClip
from thermogest.data.container import read_clip, write_clip
from thermogest.data.generator import GeneratorParams, generate_clip
from thermogest.errors import ConfigError, DataError

#: the name of the training split
SPLIT_TRAIN: Final[str] = "train"
#: the name of the test split
SPLIT_TEST: Final[str] = "test"
#: the fraction of clips in the training split
TRAIN_FRACTION: Final[float] = 0.7
#: the smallest number of clips of a dataset
MIN_CLIPS: Final[int] = 10
#: the file name of the manifest
MANIFEST_NAME: Final[str] = "manifest.jsonl"
#: the file suffix of clip containers
CLIP_SUFFIX: Final[str] = ".thgc"


@dataclass(frozen=True)
class ManifestRecord:
    """One line of a manifest."""

    #: the clip file path relative to the manifest directory
    path: str
    #: the split, `train` or `test`
    split: str
    #: the label sequence of the clip
    labels: tuple[int, ...]
    #: the class of the clip, `0` for no gesture
    cls: int

    def to_json(self) -> str:
        """
        Convert the record into one JSON line.

        :return: the JSON text

        >>> ManifestRecord("a.thgc", "test", (3, 3), 3).to_json()
        '{"path": "a.thgc", "split": "test", "labels": [3, 3], "class": 3}'
        """
        return json.dumps({"path": self.path, "split": self.split,
                           "labels": list(self.labels), "class": self.cls})

    @staticmethod
    def from_json(text: str) -> "ManifestRecord":
        """
        Parse a record from its JSON line.

        :param text: the JSON text
        :return: the record

        >>> ManifestRecord.from_json(
        ...     '{"path": "a", "split": "train", "labels": [], "class": 0}')
        ManifestRecord(path='a', split='train', labels=(), cls=0)
        """
        data: Final = json.loads(text)
        if not isinstance(data, dict):
            raise type_error(data, "manifest record", dict)
        if data.get("split") not in {SPLIT_TRAIN, SPLIT_TEST}:
            raise DataError(f"Invalid split in {text!r}.")
        return ManifestRecord(str(data["path"]), data["split"],
                              tuple(int(v) for v in data["labels"]),
                              int(data["class"]))


def split_assignment(n: int, seed: int) -> list[str]:
    """
    Assign each clip of a dataset to a split.

    :param n: the number of clips
    :param seed: the seed
    :return: the split name of each clip

    >>> s = split_assignment(100, 1)
    >>> s.count("train"), s.count("test")
    (70, 30)
    """
    perm: Final[np.ndarray] = np.random.default_rng(seed).permutation(n)
    n_train: Final[int] = round(TRAIN_FRACTION * n)
    result: Final[list[str]] = [SPLIT_TEST] * n
    for i in perm[:n_train]:
        result[int(i)] = SPLIT_TRAIN
    return result


def build_dataset(out_dir: str, n_clips: int, seed: int,
                  params: GeneratorParams | None = None,
                  n_classes: int = N_CLASSES) -> list[ManifestRecord]:
    """
    Generate a dataset of synthetic clips with its manifest.

    :param out_dir: the output directory
    :param n_clips: the number of clips, at least 10
    :param seed: the seed
    :param params: the generator parameters, `None` for the defaults
    :param n_classes: the number of classes used, including the
        non-gesture class
    :return: the manifest records
    """
    check_int_range(n_clips, "n_clips", MIN_CLIPS, 10_000_000)
    check_int_range(n_classes, "n_classes", 2, N_CLASSES)
    check_int_range(seed, "seed", 0, 2 ** 63 - 1)
    out: Final[Path] = Path(out_dir)
    out.ensure_dir_exists()
    splits: Final[list[str]] = split_assignment(n_clips, seed)
    records: Final[list[ManifestRecord]] = []
    for i in range(n_clips):
        clip = generate_clip(i % n_classes, np.random.default_rng(
            [seed, i]), params)
        name = f"clip_{i:06d}{CLIP_SUFFIX}"
        write_clip(out.resolve_inside(name), clip)
        records.append(ManifestRecord(name, splits[i], clip.labels,
                                      clip.cls))
    manifest: Final[Path] = out.resolve_inside(MANIFEST_NAME)
    with manifest.open_for_write() as wd:
        write_lines((r.to_json() for r in records), wd)
    logger(f"Generated {n_clips} clips of {n_classes} classes into "
           f"{out!r}, {splits.count(SPLIT_TRAIN)} for training.")
    return records


def read_manifest(path: str) -> list[ManifestRecord]:
    """
    Read a manifest file.

    :param path: the path to the manifest
    :return: the records
    :raises DataError: if a line is broken
    """
    src: Final[Path] = file_path(path)
    records: Final[list[ManifestRecord]] = []
    for i, line in enumerate(src.read_all_str().splitlines()):
        if not line.strip():
            continue
        try:
            records.append(ManifestRecord.from_json(line))
        except (ValueError, KeyError, TypeError) as err:
            raise DataError(f"Broken manifest line {i + 1} in "
                            f"{src!r}: {err}") from err
    return records


class ClipSource(ABC):
    """A source of clips organized in splits."""

    @abstractmethod
    def load(self, split: str) -> list[ThermalClip]:
        """
        Load all clips of a split.

        :param split: the split name, `train` or `test`
        :return: the clips, in a fixed order
        """


class ManifestSource(ClipSource):
    """The clips listed in a manifest file."""

    def __init__(self, manifest: str) -> None:
        """
        Open the manifest.

        :param manifest: the path to the manifest file, or to the directory
            containing it
        """
        path: Path = Path(manifest)
        if path.is_dir():
            path = path.resolve_inside(MANIFEST_NAME)
        if not path.is_file():
            raise DataError(f"Manifest {path!r} does not exist.")
        #: the manifest file
        self.manifest: Final[Path] = path
        #: the records
        self.records: Final[list[ManifestRecord]] = read_manifest(path)

    def load(self, split: str) -> list[ThermalClip]:
        """
        Load all clips of a split.

        :param split: the split name, `train` or `test`
        :return: the clips, in manifest order
        """
        if split not in {SPLIT_TRAIN, SPLIT_TEST}:
            raise ConfigError(f"Unknown split {split!r}.")
        base: Final[Path] = self.manifest.up()
        clips: Final[list[ThermalClip]] = []
        for r in self.records:
            if r.split != split:
                continue
            clip = read_clip(base.resolve_inside(r.path))
            if clip.labels != r.labels:
                raise DataError(f"Clip {r.path!r} has labels {clip.labels}"
                                f" but the manifest says {r.labels}.")
            clips.append(clip)
        logger(f"Loaded {len(clips)} {split} clips from {self.manifest!r}.")
        return clips


def class_histogram(records: Iterable[ManifestRecord],
                    n_classes: int = N_CLASSES) -> list[int]:
    """
    Count the clips per class.

    :param records: the manifest records
    :param n_classes: the number of classes
    :return: the number of clips of each class
    """
    counts: Final[list[int]] = [0] * n_classes
    for r in records:
        counts[r.cls] += 1
    return counts
