"""
A generator of synthetic low-resolution thermal gesture clips.

Each clip shows a static background of 20 to 28 degrees Celsius with a
linear spatial gradient. A gesture is a warm "hand" blob rendered as a 2D
Gaussian that moves along the trajectory of its class. The blob amplitude
follows an envelope that is `1` inside the gesture nucleus and fades out
over two frames on each side with values below `0.5`, so the annotated
nuclei are exactly the frames where the blob is brighter than half of its
peak. Some gesture clips contain two gestures of the same class.
Non-gesture clips contain a dim, slowly drifting distractor blob instead.
Finally, Gaussian sensor noise is added.

Generation happens in two steps: :func:`sample_recipe` draws all random
choices into a :class:`ClipRecipe` and :func:`render_clip` turns the
recipe into frames deterministically. :func:`generate_clip` does both.

>>> clip = generate_clip(1, np.random.default_rng(3))
>>> clip.frames.shape, clip.labels[0], len(clip.nuclei) == len(clip.labels)
((48, 24, 32), 1, True)
"""
from dataclasses import dataclass
from math import pi
from typing import Any, Final, Iterable

import numpy as np
from pycommons.types import check_int_range, type_error

from thermogest.data.clip import (
    DEFAULT_FPS,
    N_CLASSES,
    Nucleus,
    ThermalClip,
    check_index,
)
from thermogest.errors import ConfigError

#: the lowest temperature a synthetic clip may contain
MIN_TEMPERATURE: Final[float] = -20.0
#: the highest temperature a synthetic clip may contain
MAX_TEMPERATURE: Final[float] = 60.0
#: the envelope values of the frames before and after a nucleus
RAMP: Final[tuple[float, ...]] = (0.4, 0.2)


def _check_range(name: str, value: Iterable[float], lo: float,
                 hi: float) -> tuple[float, float]:
    """
    Check a value range.

    :param name: the name of the range
    :param value: the pair `(low, high)`
    :param lo: the smallest allowed value
    :param hi: the largest allowed value
    :return: the range as tuple
    """
    res: Final[tuple[float, ...]] = tuple(float(v) for v in value)
    if (len(res) != 2) or not (lo <= res[0] <= res[1] <= hi):
        raise ConfigError(
            f"{name} must be a range within [{lo}, {hi}], got {value}.")
    return res  # type: ignore[return-value]


@dataclass(frozen=True, init=False)
class GeneratorParams:
    """The parameters of the clip generator."""

    #: the number of frames per clip
    n_frames: int
    #: the frame height
    height: int
    #: the frame width
    width: int
    #: the frame rate
    fps: float
    #: the probability that a gesture clip contains two gestures
    double_prob: float
    #: the range of the background temperature
    background: tuple[float, float]
    #: the range of the blob amplitude above the background
    amplitude: tuple[float, float]
    #: the range of the sensor noise standard deviation
    noise: tuple[float, float]
    #: the range of the distractor amplitude in non-gesture clips
    distractor: tuple[float, float]
    #: the range of single-gesture nucleus lengths
    nucleus: tuple[int, int]
    #: the range of nucleus lengths in double-gesture clips
    double_nucleus: tuple[int, int]

    def __init__(self, n_frames: int = 48, height: int = 24,
                 width: int = 32, fps: float = DEFAULT_FPS,
                 double_prob: float = 0.15,
                 background: Iterable[float] = (20.0, 28.0),
                 amplitude: Iterable[float] = (4.0, 12.0),
                 noise: Iterable[float] = (0.1, 0.6),
                 distractor: Iterable[float] = (2.0, 4.0),
                 nucleus: Iterable[int] = (12, 24),
                 double_nucleus: Iterable[int] = (12, 16)) -> None:
        """
        Create the generator parameters.

        :param n_frames: the number of frames per clip
        :param height: the frame height
        :param width: the frame width
        :param fps: the frame rate
        :param double_prob: the probability of two gestures in a clip
        :param background: the range of the background temperature
        :param amplitude: the range of the blob amplitude
        :param noise: the range of the sensor noise standard deviation
        :param distractor: the range of the distractor amplitude
        :param nucleus: the range of single-gesture nucleus lengths
        :param double_nucleus: the range of double-gesture nucleus lengths
        """
        object.__setattr__(self, "n_frames", check_int_range(
            n_frames, "n_frames", 8, 100_000))
        object.__setattr__(self, "height", check_int_range(
            height, "height", 4, 4096))
        object.__setattr__(self, "width", check_int_range(
            width, "width", 4, 4096))
        if not 0.0 < float(fps) < 1e6:
            raise ConfigError(f"Invalid frame rate {fps}.")
        object.__setattr__(self, "fps", float(fps))
        if not 0.0 <= float(double_prob) <= 1.0:
            raise ConfigError(f"Invalid double_prob {double_prob}.")
        object.__setattr__(self, "double_prob", float(double_prob))
        object.__setattr__(self, "background", _check_range(
            "background", background, MIN_TEMPERATURE, MAX_TEMPERATURE))
        object.__setattr__(self, "amplitude", _check_range(
            "amplitude", amplitude, 0.0, 40.0))
        object.__setattr__(self, "noise", _check_range(
            "noise", noise, 0.0, 10.0))
        object.__setattr__(self, "distractor", _check_range(
            "distractor", distractor, 0.0, 40.0))
        nuc: Final[tuple[int, ...]] = tuple(nucleus)
        dnuc: Final[tuple[int, ...]] = tuple(double_nucleus)
        for name, r in (("nucleus", nuc), ("double_nucleus", dnuc)):
            if len(r) != 2:
                raise ConfigError(f"{name} must be a range, got {r}.")
            check_int_range(r[0], name, 2, n_frames)
            check_int_range(r[1], name, r[0], n_frames)
        if (nuc[1] + 4) > n_frames:
            raise ConfigError(f"Nuclei of {nuc[1]} frames do not fit into "
                              f"{n_frames} frames.")
        if (2 * dnuc[1] + 9) > n_frames:
            raise ConfigError(f"Two nuclei of {dnuc[1]} frames do not fit "
                              f"into {n_frames} frames.")
        object.__setattr__(self, "nucleus", nuc)
        object.__setattr__(self, "double_nucleus", dnuc)

    def to_dict(self) -> dict[str, Any]:
        """
        Convert the parameters to a JSON-compatible dictionary.

        :return: the dictionary
        """
        return {"n_frames": self.n_frames, "height": self.height,
                "width": self.width, "fps": self.fps,
                "double_prob": self.double_prob,
                "background": list(self.background),
                "amplitude": list(self.amplitude),
                "noise": list(self.noise),
                "distractor": list(self.distractor),
                "nucleus": list(self.nucleus),
                "double_nucleus": list(self.double_nucleus)}

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "GeneratorParams":
        """
        Load the parameters from a dictionary.

        :param data: the dictionary
        :return: the parameters

        >>> p = GeneratorParams(n_frames=40)
        >>> GeneratorParams.from_dict(p.to_dict()) == p
        True
        """
        if not isinstance(data, dict):
            raise type_error(data, "generator", dict)
        unknown = set(data.keys()).difference(GeneratorParams().to_dict())
        if unknown:
            raise ConfigError(f"Unknown generator keys {sorted(unknown)}.")
        return GeneratorParams(**data)


@dataclass(frozen=True)
class ClipRecipe:
    """All random choices defining one synthetic clip."""

    #: the class, `0` for a non-gesture clip
    cls: int
    #: the mean background temperature
    background: float
    #: the background temperature difference from left to right
    grad_x: float
    #: the background temperature difference from top to bottom
    grad_y: float
    #: the peak blob amplitude above the background
    amplitude: float
    #: the blob radius in pixels
    radius: float
    #: the standard deviation of the sensor noise
    sigma: float
    #: the nuclei as `(start, end)` pairs, empty for non-gesture clips
    nuclei: tuple[tuple[int, int], ...]
    #: the anchor point of the trajectory as fractions of width and height
    anchor: tuple[float, float]
    #: the total drift of the distractor in pixels
    drift: tuple[float, float]
    #: the seed of the sensor noise
    noise_seed: int


def gesture_envelope(n_frames: int,
                     nuclei: Iterable[tuple[int, int]]) -> np.ndarray:
    """
    Compute the relative blob amplitude of each frame.

    :param n_frames: the number of frames
    :param nuclei: the `(start, end)` pairs of the nuclei
    :return: the envelope, `1` inside the nuclei

    >>> gesture_envelope(8, [(3, 5)]).tolist()
    [0.0, 0.2, 0.4, 1.0, 1.0, 0.4, 0.2, 0.0]
    """
    env: Final[np.ndarray] = np.zeros(n_frames)
    for start, end in nuclei:
        env[start:end] = 1.0
        for k, v in enumerate(RAMP):
            for t in (start - 1 - k, end + k):
                if 0 <= t < n_frames:
                    env[t] = max(env[t], v)
    return env


def sample_recipe(cls: int, rng: np.random.Generator,
                  params: GeneratorParams | None = None) -> ClipRecipe:
    """
    Draw the random choices of a clip.

    :param cls: the class, `0` for a non-gesture clip
    :param rng: the random number generator
    :param params: the generator parameters, or `None` for the defaults
    :return: the recipe
    """
    p: Final[GeneratorParams] = GeneratorParams() if params is None \
        else params
    cls = check_index(cls, "cls", 0, N_CLASSES - 1)
    background: Final[float] = float(rng.uniform(*p.background))
    grad_x: Final[float] = float(rng.uniform(-2.0, 2.0))
    grad_y: Final[float] = float(rng.uniform(-2.0, 2.0))
    sigma: Final[float] = float(rng.uniform(*p.noise))
    radius: Final[float] = float(rng.uniform(2.5, 4.0))
    anchor: Final[tuple[float, float]] = (
        float(rng.uniform(0.4, 0.6)), float(rng.uniform(0.4, 0.6)))
    t: Final[int] = p.n_frames
    nuclei: tuple[tuple[int, int], ...] = ()
    drift: tuple[float, float] = (0.0, 0.0)
    if cls == 0:
        amplitude = float(rng.uniform(*p.distractor))
        drift = (float(rng.uniform(-4.0, 4.0)),
                 float(rng.uniform(-3.0, 3.0)))
    else:
        amplitude = float(rng.uniform(*p.amplitude))
        if rng.random() < p.double_prob:
            l1 = int(rng.integers(p.double_nucleus[0],
                                  p.double_nucleus[1] + 1))
            l2 = int(rng.integers(p.double_nucleus[0],
                                  p.double_nucleus[1] + 1))
            free = t - 4 - l1 - l2 - 5
            s1 = 2 + int(rng.integers(0, free + 1))
            gap = 5 + int(rng.integers(0, free - (s1 - 2) + 1))
            nuclei = ((s1, s1 + l1), (s1 + l1 + gap, s1 + l1 + gap + l2))
        else:
            ln = int(rng.integers(p.nucleus[0], p.nucleus[1] + 1))
            s = 2 + int(rng.integers(0, t - 4 - ln + 1))
            nuclei = ((s, s + ln), )
    return ClipRecipe(cls, background, grad_x, grad_y, amplitude, radius,
                      sigma, nuclei, anchor, drift,
                      int(rng.integers(0, 2 ** 31)))


def trajectory(cls: int, u: np.ndarray, anchor: tuple[float, float],
               width: int, height: int, radius: float) -> tuple[
        np.ndarray, np.ndarray, np.ndarray]:
    """
    Compute the blob center and radius along a gesture.

    :param cls: the gesture class
    :param u: the gesture phase of each frame, in `[0, 1]`
    :param anchor: the anchor point as fractions of width and height
    :param width: the frame width
    :param height: the frame height
    :param radius: the base blob radius
    :return: the column, row, and radius of the blob in each frame

    >>> x, y, r = trajectory(1, np.array([0.0, 1.0]), (0.5, 0.5), 32, 24, 3)
    >>> bool(x[0] > x[1]), bool(y[0] == y[1])
    (True, True)
    """
    ax: Final[float] = anchor[0] * (width - 1)
    ay: Final[float] = anchor[1] * (height - 1)
    one: Final[np.ndarray] = np.ones_like(u)
    x = ax * one
    y = ay * one
    r = radius * one
    sweep_x: Final[float] = 0.3 * width
    sweep_y: Final[float] = 0.3 * height
    if cls == 1:  # swipe left
        x = ax + sweep_x * (1.0 - 2.0 * u)
    elif cls == 2:  # swipe right
        x = ax - sweep_x * (1.0 - 2.0 * u)
    elif cls == 3:  # swipe up, rows grow downwards
        y = ay + sweep_y * (1.0 - 2.0 * u)
    elif cls == 4:  # swipe down
        y = ay - sweep_y * (1.0 - 2.0 * u)
    elif cls in {5, 6}:  # circles
        angle = 2.0 * pi * u * (1.0 if cls == 5 else -1.0)
        x = ax + 0.25 * height * np.cos(angle)
        y = ay + 0.25 * height * np.sin(angle)
    elif cls == 7:  # push
        r = radius * (1.0 + 0.8 * u)
    elif cls == 8:  # pull
        r = radius * (1.8 - 0.8 * u)
    elif cls == 9:  # wave
        x = ax + 0.25 * width * np.sin(4.0 * pi * u)
    else:
        raise ConfigError(f"Class {cls} has no trajectory.")
    return x, y, r


def render_clip(recipe: ClipRecipe,
                params: GeneratorParams | None = None) -> ThermalClip:
    """
    Render the frames of a clip from its recipe.

    :param recipe: the recipe
    :param params: the generator parameters, or `None` for the defaults
    :return: the clip
    """
    p: Final[GeneratorParams] = GeneratorParams() if params is None \
        else params
    t: Final[int] = p.n_frames
    h: Final[int] = p.height
    w: Final[int] = p.width
    cols: Final[np.ndarray] = np.arange(w, dtype=np.float64)
    rows: Final[np.ndarray] = np.arange(h, dtype=np.float64)
    frames: Final[np.ndarray] = np.empty((t, h, w))
    frames[...] = recipe.background + recipe.grad_x * (
        cols[None, :] / (w - 1) - 0.5) + recipe.grad_y * (
        rows[:, None] / (h - 1) - 0.5)

    times: Final[np.ndarray] = np.arange(t, dtype=np.float64)
    if recipe.cls == 0:
        amp = np.full(t, recipe.amplitude)
        progress = times / max(t - 1, 1)
        cx = recipe.anchor[0] * (w - 1) + recipe.drift[0] * progress
        cy = recipe.anchor[1] * (h - 1) + recipe.drift[1] * progress
        rad = np.full(t, recipe.radius)
    else:
        amp = recipe.amplitude * gesture_envelope(t, recipe.nuclei)
        u = np.zeros(t)
        for i in range(t):  # the phase within the closest nucleus
            s, e = min(recipe.nuclei, key=lambda n: min(
                abs(i - n[0]), abs(i - (n[1] - 1))))
            u[i] = min(max((i - s + 0.5) / (e - s), 0.0), 1.0)
        cx, cy, rad = trajectory(recipe.cls, u, recipe.anchor, w, h,
                                 recipe.radius)
    frames += amp[:, None, None] * np.exp(
        -((cols[None, None, :] - cx[:, None, None]) ** 2
          + (rows[None, :, None] - cy[:, None, None]) ** 2)
        / (2.0 * rad[:, None, None] ** 2))
    if recipe.sigma > 0.0:
        frames += np.random.default_rng(recipe.noise_seed).normal(
            0.0, recipe.sigma, frames.shape)
    np.clip(frames, MIN_TEMPERATURE, MAX_TEMPERATURE, out=frames)
    nuclei: Final[list[Nucleus]] = [
        Nucleus(s, e, recipe.cls) for s, e in recipe.nuclei]
    return ThermalClip(frames.astype(np.float32), [recipe.cls] * len(
        nuclei), nuclei, p.fps)


def generate_clip(cls: int, rng: np.random.Generator,
                  params: GeneratorParams | None = None) -> ThermalClip:
    """
    Generate a random clip of a class.

    :param cls: the class, `0` for a non-gesture clip
    :param rng: the random number generator
    :param params: the generator parameters, or `None` for the defaults
    :return: the clip
    """
    return render_clip(sample_recipe(cls, rng, params), params)
