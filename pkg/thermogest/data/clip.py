"""
Thermal clips and their gesture nucleus annotations.

A :class:`ThermalClip` is a short video of temperature frames in degrees
Celsius together with its label sequence and the annotated nuclei of its
gestures. Class `0` is the non-gesture class. The gesture classes are
numbered from `1` on, see :data:`GESTURE_NAMES`.

>>> n = Nucleus(10, 20, 3)
>>> n.length, n.contains(19), n.contains(20)
(10, True, False)
>>> n.shifted(48)
Nucleus(start=58, end=68, cls=3)
"""
from dataclasses import dataclass
from typing import Final, Iterable

import numpy as np
from pycommons.types import check_int_range, type_error

from thermogest.errors import DataError

#: the names of all classes, index 0 is the non-gesture class
CLASS_NAMES: Final[tuple[str, ...]] = (
    "none", "swipe-left", "swipe-right", "swipe-up", "swipe-down",
    "circle-cw", "circle-ccw", "push", "pull", "wave")
#: the names of the gesture classes, starting at class 1
GESTURE_NAMES: Final[tuple[str, ...]] = CLASS_NAMES[1:]
#: the number of classes, including the non-gesture class
N_CLASSES: Final[int] = len(CLASS_NAMES)
#: the default frame rate of the sensor
DEFAULT_FPS: Final[float] = 16.0



def check_index(value: int, name: str, min_value: int,
                max_value: int) -> int:
    """
    Check a class label or frame index, accepting numpy integers.

    :param value: the value
    :param name: the name of the value
    :param min_value: the smallest allowed value
    :param max_value: the largest allowed value
    :return: the value as Python `int`

    >>> check_index(np.int64(3), "label", 0, 9)
    3
    >>> type(check_index(np.uint8(3), "label", 0, 9))
    <class 'int'>
    """
    return check_int_range(int(value) if isinstance(value, np.integer)
                           else value, name, min_value, max_value)


@dataclass(frozen=True, init=False, order=True)
class Nucleus:
    """The half-open frame interval `[start, end)` of a gesture core."""

    #: the first frame of the nucleus
    start: int
    #: the first frame after the nucleus
    end: int
    #: the gesture class
    cls: int

    def __init__(self, start: int, end: int, cls: int) -> None:
        """
        Create the nucleus.

        :param start: the first frame of the nucleus
        :param end: the first frame after the nucleus
        :param cls: the gesture class, never the non-gesture class
        """
        start = check_index(start, "start", 0, 1_000_000_000)
        end = check_index(end, "end", start + 1, 1_000_000_000)
        cls = check_index(cls, "cls", 1, 255)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)
        object.__setattr__(self, "cls", cls)

    @property
    def length(self) -> int:
        """
        Get the number of frames of the nucleus.

        :return: the number of frames
        """
        return self.end - self.start

    def contains(self, frame: int) -> bool:
        """
        Check whether a frame lies in this nucleus.

        :param frame: the frame index
        :return: `True` if `start <= frame < end`
        """
        return self.start <= frame < self.end

    def shifted(self, offset: int) -> "Nucleus":
        """
        Move the nucleus in time.

        :param offset: the number of frames to add
        :return: the moved nucleus
        """
        return Nucleus(self.start + offset, self.end + offset, self.cls)


def check_nuclei(nuclei: Iterable[Nucleus],
                 n_frames: int | None = None) -> tuple[Nucleus, ...]:
    """
    Sort nuclei and make sure that they do not overlap.

    :param nuclei: the nuclei
    :param n_frames: the number of frames they must fit into, or `None`
    :return: the sorted nuclei
    :raises DataError: if two nuclei overlap or a nucleus does not fit

    >>> check_nuclei([Nucleus(5, 9, 1), Nucleus(0, 5, 1)])[0].start
    0
    >>> try:
    ...     check_nuclei([Nucleus(0, 6, 1), Nucleus(5, 9, 2)])
    ... except DataError as de:
    ...     print(de)
    Nuclei [0, 6) and [5, 9) overlap.
    """
    result: Final[list[Nucleus]] = sorted(nuclei)
    for i, n in enumerate(result):
        if not isinstance(n, Nucleus):
            raise type_error(n, f"nuclei[{i}]", Nucleus)
        if (i > 0) and (result[i - 1].end > n.start):
            p = result[i - 1]
            raise DataError(f"Nuclei [{p.start}, {p.end}) and "
                            f"[{n.start}, {n.end}) overlap.")
    if (n_frames is not None) and result and (result[-1].end > n_frames):
        raise DataError(f"Nucleus ends at {result[-1].end} but there are "
                        f"only {n_frames} frames.")
    return tuple(result)


@dataclass(frozen=True, init=False, eq=False)
class ThermalClip:
    """A thermal video with labels and nucleus annotations."""

    #: the frames of shape `[T, H, W]` in degrees Celsius
    frames: np.ndarray
    #: the label sequence: empty for no gesture, else one label per
    #: gesture
    labels: tuple[int, ...]
    #: the nuclei of the gestures
    nuclei: tuple[Nucleus, ...]
    #: the frame rate
    fps: float

    def __init__(self, frames: np.ndarray, labels: Iterable[int] = (),
                 nuclei: Iterable[Nucleus] = (),
                 fps: float = DEFAULT_FPS) -> None:
        """
        Create the clip.

        :param frames: the frames of shape `[T, H, W]`
        :param labels: the label sequence
        :param nuclei: the nuclei of the gestures
        :param fps: the frame rate
        """
        if not isinstance(frames, np.ndarray):
            raise type_error(frames, "frames", np.ndarray)
        if (frames.ndim != 3) or (frames.shape[0] < 1):
            raise DataError(f"Frames must have shape [T, H, W] with T >= 1, "
                            f"got {frames.shape}.")
        lbl: Final[tuple[int, ...]] = tuple(
            check_index(lb, "label", 1, 255) for lb in labels)
        if not isinstance(fps, float | int):
            raise type_error(fps, "fps", float)
        if not 0.0 < fps < 1e6:
            raise DataError(f"Invalid frame rate {fps}.")
        object.__setattr__(self, "frames", frames.astype(
            np.float32, copy=False))
        object.__setattr__(self, "labels", lbl)
        object.__setattr__(self, "nuclei", check_nuclei(
            nuclei, frames.shape[0]))
        object.__setattr__(self, "fps", float(fps))

    @property
    def n_frames(self) -> int:
        """
        Get the number of frames.

        :return: the number of frames
        """
        return int(self.frames.shape[0])

    @property
    def height(self) -> int:
        """
        Get the frame height.

        :return: the number of rows per frame
        """
        return int(self.frames.shape[1])

    @property
    def width(self) -> int:
        """
        Get the frame width.

        :return: the number of columns per frame
        """
        return int(self.frames.shape[2])

    @property
    def cls(self) -> int:
        """
        Get the class of the clip.

        :return: the gesture class, or `0` for a non-gesture clip

        >>> ThermalClip(np.zeros((2, 24, 32)), (4, 4)).cls
        4
        >>> ThermalClip(np.zeros((2, 24, 32))).cls
        0
        """
        return self.labels[0] if self.labels else 0

    def with_frames(self, frames: np.ndarray) -> "ThermalClip":
        """
        Create a copy of this clip with other frames of the same length.

        :param frames: the new frames
        :return: the new clip
        """
        return ThermalClip(frames, self.labels, self.nuclei, self.fps)
