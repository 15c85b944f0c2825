"""
Event detection metrics on long, stitched test videos.

A random half of the test clips is concatenated into one long video whose
gesture nuclei are known. A detector turns the video into events, which
are matched against the nuclei: processed in descending order of their
scores, an event counts as true positive if its frame lies inside a not
yet matched nucleus of its own class. Every other event is a false
positive, i.e., second detections inside a nucleus as well as detections
outside of any nucleus. Nuclei left unmatched are false negatives.

For every gesture class, sweeping the detection threshold over the event
scores yields a precision-recall curve. Its precision is interpolated
(the best precision at any recall not smaller than the grid point) on the
101 recall values `0.00, 0.01, ..., 1.00`. The curves of all classes with
at least one nucleus are averaged, and the mean of the averaged curve is
the mean average precision (mAP).

>>> nuclei = [Nucleus(0, 10, 1), Nucleus(20, 30, 1)]
>>> events = [DetectionEvent(5, 1, 0.9), DetectionEvent(15, 1, 0.8)]
>>> result = map_score(events, nuclei, (1, ))
>>> round(result.map, 4), round(51 / 101, 4)
(0.505, 0.505)
"""
from dataclasses import dataclass
from typing import Callable, Final, Iterable

import numpy as np
from pycommons.io.console import logger
from pycommons.io.path import Path, write_lines
from pycommons.types import check_int_range, type_error

from thermogest.data.clip import GESTURE_NAMES, Nucleus, ThermalClip, \
    check_nuclei
from thermogest.errors import ConfigError, DataError
from thermogest.inference.streaming import (
    DEFAULT_FLOOR,
    DEFAULT_WINDOW,
    DetectionEvent,
    EmaNormalizer,
    detect_stream,
)
from thermogest.model.network import GestureNet

#: the recall grid of the interpolated precision-recall curves
RECALL_GRID: Final[np.ndarray] = np.arange(101) / 100.0
#: the separator of the PR-curve tables
CSV_SEPARATOR: Final[str] = ";"

#: a detector maps a video and an output offset to events
Detector = Callable[[ThermalClip, int], list[DetectionEvent]]


def stitch_test_video(clips: list[ThermalClip], fraction: float = 0.5,
                      seed: int = 0) -> ThermalClip:
    """
    Concatenate a random subset of clips into one long video.

    :param clips: the test clips
    :param fraction: the fraction of clips to use, at least one
    :param seed: the seed of the random selection and order
    :return: the video, with the labels and the moved nuclei of all
        selected clips
    :raises DataError: if the clips differ in size or frame rate
    """
    if not clips:
        raise DataError("Cannot stitch a video from zero clips.")
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"fraction must be in (0, 1], got {fraction}.")
    first: Final[ThermalClip] = clips[0]
    for i, c in enumerate(clips):
        if (c.height, c.width, c.fps) != (
                first.height, first.width, first.fps):
            raise DataError(
                f"Clip {i} has {c.width}x{c.height} pixels at {c.fps} FPS, "
                f"but clip 0 has {first.width}x{first.height} pixels at "
                f"{first.fps} FPS.")
    n: Final[int] = max(1, round(fraction * len(clips)))
    order: Final[np.ndarray] = np.random.default_rng(seed).permutation(
        len(clips))[:n]
    frames: Final[list[np.ndarray]] = []
    labels: Final[list[int]] = []
    nuclei: Final[list[Nucleus]] = []
    offset: int = 0
    for i in order:
        c = clips[int(i)]
        frames.append(c.frames)
        labels.extend(c.labels)
        nuclei.extend(nu.shifted(offset) for nu in c.nuclei)
        offset += c.n_frames
    logger(f"Stitched {n} of {len(clips)} clips into a video of {offset} "
           f"frames with {len(nuclei)} nuclei.")
    return ThermalClip(np.concatenate(frames), labels, nuclei, first.fps)


@dataclass(frozen=True)
class MatchResult:
    """The outcome of matching events against nuclei."""

    #: for each event, in input order: is it a true positive?
    true_positive: tuple[bool, ...]
    #: for each nucleus, in input order: was it matched?
    matched: tuple[bool, ...]

    @property
    def tp(self) -> int:
        """
        Get the number of true positives.

        :return: the number of true positives
        """
        return sum(self.true_positive)

    @property
    def fp(self) -> int:
        """
        Get the number of false positives.

        :return: the number of false positives
        """
        return len(self.true_positive) - self.tp

    @property
    def fn(self) -> int:
        """
        Get the number of false negatives.

        :return: the number of missed nuclei
        """
        return len(self.matched) - sum(self.matched)


def __score_order(events: list[DetectionEvent]) -> list[int]:
    """
    Get the processing order of events: descending score, then frame.

    :param events: the events
    :return: the event indices in processing order
    """
    return sorted(range(len(events)),
                  key=lambda i: (-events[i].score, events[i].frame,
                                 events[i].cls))


def match_events(events: Iterable[DetectionEvent],
                 nuclei: Iterable[Nucleus]) -> MatchResult:
    """
    Match events against the annotated nuclei.

    :param events: the events
    :param nuclei: the nuclei, which must not overlap
    :return: the match result
    :raises DataError: if nuclei overlap

    >>> r = match_events(
    ...     [DetectionEvent(3, 1, 0.9), DetectionEvent(4, 1, 0.5),
    ...      DetectionEvent(4, 2, 0.7)], [Nucleus(2, 6, 1)])
    >>> r.true_positive, r.tp, r.fp, r.fn
    ((True, False, False), 1, 2, 0)
    """
    evs: Final[list[DetectionEvent]] = list(events)
    nus: Final[list[Nucleus]] = list(nuclei)
    check_nuclei(nus)
    starts: Final[np.ndarray] = np.array([n.start for n in nus], dtype=int)
    by_start: Final[np.ndarray] = np.argsort(starts, kind="stable")
    sorted_starts: Final[np.ndarray] = starts[by_start]
    matched: Final[list[bool]] = [False] * len(nus)
    tp: Final[list[bool]] = [False] * len(evs)
    for i in __score_order(evs):
        e = evs[i]
        pos = int(np.searchsorted(sorted_starts, e.frame, side="right")) - 1
        if pos < 0:
            continue
        j = int(by_start[pos])
        n = nus[j]
        if (n.start <= e.frame < n.end) and (n.cls == e.cls) and (
                not matched[j]):
            matched[j] = True
            tp[i] = True
    return MatchResult(tuple(tp), tuple(matched))


@dataclass(frozen=True, init=False)
class PrCurve:
    """An interpolated precision-recall curve on the 101-point grid."""

    #: the gesture class, or `0` for a class-averaged curve
    cls: int
    #: the interpolated precision at each grid recall
    precision: np.ndarray

    def __init__(self, cls: int, precision: np.ndarray) -> None:
        """
        Create the curve.

        :param cls: the gesture class, `0` for an averaged curve
        :param precision: the 101 interpolated precision values
        """
        check_int_range(cls, "cls", 0, 255)
        p: Final[np.ndarray] = np.asarray(precision, dtype=np.float64)
        if p.shape != RECALL_GRID.shape:
            raise DataError(f"Need {RECALL_GRID.size} precision values, "
                            f"got {p.shape}.")
        if np.any((p < 0.0) | (p > 1.0)) or np.any(np.diff(p) > 1e-12):
            raise DataError("Interpolated precision must be in [0, 1] and "
                            "non-increasing.")
        object.__setattr__(self, "cls", cls)
        object.__setattr__(self, "precision", p)

    @property
    def ap(self) -> float:
        """
        Get the area under the curve.

        :return: the mean of the interpolated precision values
        """
        return float(self.precision.mean())


def interpolated_precision(tp: np.ndarray, n_nuclei: int) -> np.ndarray:
    """
    Compute the interpolated precision of events sorted by score.

    :param tp: for each event in descending score order: is it a true
        positive?
    :param n_nuclei: the number of nuclei of the class
    :return: the interpolated precision at each grid recall

    >>> interpolated_precision(np.array([True, False]), 2)[[0, 50, 51]]
    array([1., 1., 0.])
    """
    check_int_range(n_nuclei, "n_nuclei", 1, 1_000_000_000)
    result: Final[np.ndarray] = np.zeros(RECALL_GRID.size)
    if tp.size <= 0:
        return result
    hits: Final[np.ndarray] = np.cumsum(tp)
    recall: Final[np.ndarray] = hits / n_nuclei
    precision: Final[np.ndarray] = hits / np.arange(1, tp.size + 1)
    best_after: Final[np.ndarray] = np.maximum.accumulate(
        precision[::-1])[::-1]
    for g, r in enumerate(RECALL_GRID):
        idx = int(np.searchsorted(recall, r - 1e-12, side="left"))
        if idx < recall.size:
            result[g] = best_after[idx]
    return result


@dataclass(frozen=True)
class MapResult:
    """The mean average precision with its curves."""

    #: the mean average precision
    map: float
    #: the curves of the evaluated classes
    curves: tuple[PrCurve, ...]
    #: the class-averaged curve
    mean_curve: PrCurve
    #: the classes excluded for lack of nuclei
    excluded: tuple[int, ...]


def map_score(events: Iterable[DetectionEvent], nuclei: Iterable[Nucleus],
              classes: Iterable[int] | None = None) -> MapResult:
    """
    Compute the mean average precision of events.

    :param events: the events
    :param nuclei: the nuclei
    :param classes: the gesture classes to evaluate, `None` for all
    :return: the result
    :raises DataError: if no evaluated class has a nucleus

    >>> map_score([], [Nucleus(0, 4, 2)], (2, )).map
    0.0
    """
    evs: Final[list[DetectionEvent]] = list(events)
    nus: Final[tuple[Nucleus, ...]] = check_nuclei(nuclei)
    cls_list: Final[list[int]] = sorted(set(
        range(1, len(GESTURE_NAMES) + 1) if classes is None else classes))
    match: Final[MatchResult] = match_events(evs, nus)
    curves: Final[list[PrCurve]] = []
    excluded: Final[list[int]] = []
    for c in cls_list:
        n_nuclei = sum(1 for n in nus if n.cls == c)
        if n_nuclei <= 0:
            excluded.append(c)
            continue
        order = [i for i in __score_order(evs) if evs[i].cls == c]
        tp = np.array([match.true_positive[i] for i in order], dtype=bool)
        curves.append(PrCurve(c, interpolated_precision(tp, n_nuclei)))
    if excluded:
        logger(f"Excluded classes without nuclei from the mAP: {excluded}.")
    if not curves:
        raise DataError("No evaluated class has any nucleus.")
    mean: Final[PrCurve] = PrCurve(0, np.mean(
        [c.precision for c in curves], axis=0))
    return MapResult(mean.ap, tuple(curves), mean, tuple(excluded))


def pr_table(result: MapResult) -> list[str]:
    """
    Render the curves of a result as delimiter-separated lines.

    :param result: the result
    :return: the header and one line per grid recall

    >>> r = map_score([DetectionEvent(1, 3, 0.5)], [Nucleus(0, 2, 3)], (3, ))
    >>> pr_table(r)[:2]
    ['recall;class_3;mean', '0.00;1.000000;1.000000']
    """
    lines: Final[list[str]] = [CSV_SEPARATOR.join(
        ["recall", *(f"class_{c.cls}" for c in result.curves), "mean"])]
    for g, r in enumerate(RECALL_GRID):
        lines.append(CSV_SEPARATOR.join(
            [f"{r:.2f}", *(f"{c.precision[g]:.6f}" for c in result.curves),
             f"{result.mean_curve.precision[g]:.6f}"]))
    return lines


def write_pr_table(path: str, result: MapResult) -> Path:
    """
    Write the curves of a result to a file.

    :param path: the destination file
    :param result: the result
    :return: the path
    """
    dest: Final[Path] = Path(path)
    with dest.open_for_write() as wd:
        write_lines(pr_table(result), wd)
    return dest


def network_detector(net: GestureNet, window: int = DEFAULT_WINDOW,
                     floor: float = DEFAULT_FLOOR) -> Detector:
    """
    Create a detector that streams a video through a network.

    Each run normalizes the frames with fresh running statistics.

    :param net: the network
    :param window: the window length
    :param floor: the lowest probability of a detection
    :return: the detector
    """
    if not isinstance(net, GestureNet):
        raise type_error(net, "net", GestureNet)

    def detect(video: ThermalClip, delta: int) -> list[DetectionEvent]:
        """
        Stream a video through the network.

        :param video: the video
        :param delta: the output offset
        :return: the events
        """
        return detect_stream(net, video.frames, window, delta, floor,
                             EmaNormalizer())
    return detect


def oracle_detector(video: ThermalClip, delta: int) \
        -> list[DetectionEvent]:
    """
    Detect every nucleus perfectly, whatever the output offset.

    :param video: the video with its nuclei
    :param delta: the output offset, ignored
    :return: one event with score 1 in the middle of each nucleus
    """
    return [DetectionEvent((n.start + n.end - 1) // 2, n.cls, 1.0)
            for n in video.nuclei]


@dataclass(frozen=True)
class SweepRow:
    """The detection quality at one output offset."""

    #: the output offset
    delta: int
    #: the mean average precision
    map: float
    #: the number of events
    events: int


def delta_sweep(detector: Detector, video: ThermalClip,
                deltas: Iterable[int],
                classes: Iterable[int] | None = None) -> list[SweepRow]:
    """
    Compute the mAP of a detector at several output offsets.

    :param detector: the detector
    :param video: the stitched test video
    :param deltas: the output offsets
    :param classes: the gesture classes to evaluate, `None` for all
    :return: one row per offset
    """
    if not callable(detector):
        raise type_error(detector, "detector", call=True)
    cls: Final[tuple[int, ...] | None] = None if classes is None \
        else tuple(classes)
    rows: Final[list[SweepRow]] = []
    for delta in deltas:
        events = detector(video, delta)
        result = map_score(events, video.nuclei, cls)
        rows.append(SweepRow(delta, result.map, len(events)))
        logger(f"delta={delta}: mAP={result.map:.4f} with {len(events)} "
               "events.")
    return rows
