"""
Clip normalization and data augmentation.

Every clip is standardized on its own by :func:`normalize_clip`. During
training, :func:`augment` first cuts a window of `N` frames from the clip
with a random temporal shift and scale, then crops a random corner and
resizes it back, changes contrast and brightness, and adds Gaussian noise.
The augmentation is applied to the temperatures in degrees Celsius, before
normalization.

>>> import numpy as np
>>> normalize_frames(np.array([[[0.0, 2.0]], [[2.0, 0.0]]])).ravel().tolist()
[-1.0, 1.0, 1.0, -1.0]
"""
from dataclasses import dataclass
from math import ceil
from typing import Any, Final

import numpy as np
from pycommons.types import check_int_range, type_error

from thermogest.data.clip import Nucleus, ThermalClip
from thermogest.errors import ConfigError, DataError, SkipSample
from thermogest.model.encoder import resize_frames

#: the smallest standard deviation used for normalization
MIN_STD: Final[float] = 1e-6


def normalize_frames(frames: np.ndarray) -> np.ndarray:
    """
    Standardize frames to zero mean and unit standard deviation.

    :param frames: the frames
    :return: `(frames - mean) / max(std, 1e-6)` as 32 bit floats
    :raises DataError: if there are no frames
    """
    if frames.size <= 0:
        raise DataError("Cannot normalize an empty clip.")
    x: Final[np.ndarray] = frames.astype(np.float64)
    mean: Final[float] = float(x.mean())
    std: Final[float] = float(x.std())
    return ((x - mean) / max(std, MIN_STD)).astype(np.float32)


def normalize_clip(clip: ThermalClip) -> ThermalClip:
    """
    Standardize a clip to zero mean and unit standard deviation.

    :param clip: the clip
    :return: the normalized clip

    >>> c = normalize_clip(ThermalClip(np.full((3, 2, 2), 25.0)))
    >>> float(np.abs(c.frames).max())
    0.0
    """
    return clip.with_frames(normalize_frames(clip.frames))


@dataclass(frozen=True, init=False)
class AugmentParams:
    """The magnitudes of all augmentations."""

    #: the fraction of rows and columns removed by the corner crop
    crop: float
    #: the contrast factor is drawn from `[1 - contrast, 1 + contrast]`
    contrast: float
    #: the brightness offset in Celsius is drawn from `[-b, b]`
    brightness: float
    #: the noise standard deviation in Celsius is drawn from `[0, noise]`
    noise: float
    #: the window start moves by up to this fraction of the window length
    shift: float
    #: the temporal scale factor is drawn from `[1 - scale, 1 + scale]`
    scale: float

    def __init__(self, crop: float = 0.1, contrast: float = 0.1,
                 brightness: float = 2.0, noise: float = 0.5,
                 shift: float = 0.25, scale: float = 0.2) -> None:
        """
        Create the augmentation parameters.

        :param crop: the fraction removed by the corner crop
        :param contrast: the contrast range
        :param brightness: the brightness range in Celsius
        :param noise: the largest noise standard deviation in Celsius
        :param shift: the temporal shift range as fraction of the window
        :param scale: the temporal scale range
        """
        for name, value, hi in (
                ("crop", crop, 0.5), ("contrast", contrast, 0.9),
                ("brightness", brightness, 20.0), ("noise", noise, 10.0),
                ("shift", shift, 1.0), ("scale", scale, 0.9)):
            if not isinstance(value, float | int):
                raise type_error(value, name, float)
            if not 0.0 <= value <= hi:
                raise ConfigError(f"{name} must be in [0, {hi}], "
                                  f"got {value}.")
            object.__setattr__(self, name, float(value))

    def to_dict(self) -> dict[str, Any]:
        """
        Convert the parameters to a JSON-compatible dictionary.

        :return: the dictionary
        """
        return {"crop": self.crop, "contrast": self.contrast,
                "brightness": self.brightness, "noise": self.noise,
                "shift": self.shift, "scale": self.scale}

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "AugmentParams":
        """
        Load the parameters from a dictionary.

        :param data: the dictionary
        :return: the parameters
        """
        if not isinstance(data, dict):
            raise type_error(data, "augment", dict)
        unknown = set(data.keys()).difference(AugmentParams().to_dict())
        if unknown:
            raise ConfigError(f"Unknown augment keys {sorted(unknown)}.")
        return AugmentParams(**data)


#: no augmentation at all
NO_AUGMENTATION: Final[AugmentParams] = AugmentParams(0, 0, 0, 0, 0, 0)


def corner_crop(frames: np.ndarray, crop: float, corner: int) -> np.ndarray:
    """
    Remove a border of rows and columns and resize back.

    :param frames: the frames of shape `[T, H, W]`
    :param crop: the fraction of rows and columns to remove
    :param corner: the kept corner, `0` top left, `1` top right, `2` bottom
        left, `3` bottom right
    :return: the frames with the same shape

    >>> f = np.arange(16.0).reshape(1, 4, 4)
    >>> corner_crop(f, 0.5, 0)[0, 0].tolist()
    [0.0, 0.25, 0.75, 1.0]
    """
    check_int_range(corner, "corner", 0, 3)
    h, w = frames.shape[1:]
    kh: Final[int] = max(1, round(h * (1.0 - crop)))
    kw: Final[int] = max(1, round(w * (1.0 - crop)))
    if (kh == h) and (kw == w):
        return frames
    r0: Final[int] = 0 if corner < 2 else h - kh
    c0: Final[int] = 0 if (corner % 2) == 0 else w - kw
    return resize_frames(frames[:, r0:r0 + kh, c0:c0 + kw], (h, w))


def adjust_intensity(frames: np.ndarray, contrast: float,
                     brightness: float) -> np.ndarray:
    """
    Change contrast and brightness.

    :param frames: the frames
    :param contrast: the factor `a`
    :param brightness: the offset `b` in Celsius
    :return: `a * frames + b`

    >>> adjust_intensity(np.array([20.0, 25.5]), 1.0, 5.0).tolist()
    [25.0, 30.5]
    """
    return contrast * frames + brightness


def window_indices(n_frames: int, window: int, factor: float,
                   shift: int) -> np.ndarray:
    """
    Get the source frame of each frame of a resampled window.

    The window covers `window * factor` source frames centered in the clip
    and moved by `shift` frames. Each output frame takes the nearest source
    frame. Positions outside the clip repeat the first or last frame.

    :param n_frames: the number of frames of the clip
    :param window: the number of frames of the window
    :param factor: the temporal scale factor
    :param shift: the temporal shift in frames
    :return: the source frame indices

    >>> window_indices(6, 6, 1.0, 0).tolist()
    [0, 1, 2, 3, 4, 5]
    >>> window_indices(6, 4, 1.0, -2).tolist()
    [0, 0, 1, 2]
    >>> window_indices(4, 4, 0.5, 0).tolist()
    [1, 2, 2, 3]
    """
    start: Final[float] = (n_frames - window * factor) / 2.0 + shift
    src: Final[np.ndarray] = np.floor(
        start + np.arange(window) * factor + 0.5).astype(int)
    return np.clip(src, 0, n_frames - 1)


def remap_nuclei(nuclei: tuple[Nucleus, ...],
                 src: np.ndarray) -> list[Nucleus]:
    """
    Move nuclei into a resampled window.

    :param nuclei: the nuclei in source frames
    :param src: the source frame of each window frame
    :return: the nuclei in window frames; nuclei outside the window vanish
    """
    result: Final[list[Nucleus]] = []
    for n in nuclei:
        inside = np.flatnonzero((src >= n.start) & (src < n.end))
        if inside.size > 0:
            start = int(inside[0])
            if result and (result[-1].end > start):
                start = result[-1].end
            if start <= int(inside[-1]):
                result.append(Nucleus(start, int(inside[-1]) + 1, n.cls))
    return result


def augment(clip: ThermalClip, params: AugmentParams,
            rng: np.random.Generator,
            window: int | None = None) -> ThermalClip:
    """
    Apply a random augmentation to a clip.

    The label sequence is never changed.

    :param clip: the clip in Celsius
    :param params: the augmentation magnitudes
    :param rng: the random number generator
    :param window: the number of output frames, `None` for the clip length
    :return: the augmented clip with `window` frames
    :raises SkipSample: if the clip is too short for the window
    """
    t: Final[int] = clip.n_frames
    n: Final[int] = t if window is None else check_int_range(
        window, "window", 1, 1_000_000)
    if t < ceil(n * (1.0 - params.scale)):
        raise SkipSample(f"Clip of {t} frames is too short for a window of "
                         f"{n} frames at scale {params.scale}.")
    factor: Final[float] = float(rng.uniform(
        1.0 - params.scale, 1.0 + params.scale))
    shift: Final[int] = round(float(rng.uniform(
        -params.shift, params.shift)) * n)
    src: Final[np.ndarray] = window_indices(t, n, factor, shift)
    frames: np.ndarray = clip.frames[src]

    corner: Final[int] = int(rng.integers(0, 4))
    if params.crop > 0.0:
        frames = corner_crop(frames, params.crop, corner)
    frames = adjust_intensity(
        frames, float(rng.uniform(1.0 - params.contrast,
                                  1.0 + params.contrast)),
        float(rng.uniform(-params.brightness, params.brightness)))
    sigma: Final[float] = float(rng.uniform(0.0, params.noise))
    if sigma > 0.0:
        frames = frames + rng.normal(0.0, sigma, frames.shape)
    return ThermalClip(frames.astype(np.float32), clip.labels,
                       remap_nuclei(clip.nuclei, src), clip.fps)
