"""Test the synthetic clip generator."""

from typing import Final

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from thermogest.data.clip import N_CLASSES
from thermogest.data.generator import (
    ClipRecipe,
    GeneratorParams,
    generate_clip,
    render_clip,
)
from thermogest.errors import ConfigError


def recipe(cls: int) -> ClipRecipe:
    """
    Get a noise-free recipe on a flat background.

    :param cls: the gesture class
    :return: the recipe
    """
    return ClipRecipe(cls, 24.0, 0.0, 0.0, 10.0, 3.0, 0.0, ((10, 30), ),
                      (0.5, 0.5), (0.0, 0.0), 0)


def centroid(frame: np.ndarray) -> tuple[float, float]:
    """
    Compute the center of the warmth above 24 degrees.

    :param frame: the frame
    :return: the column and the row
    """
    heat: Final[np.ndarray] = np.maximum(frame - 24.0, 0.0)
    rows, cols = np.indices(frame.shape)
    total: Final[float] = float(heat.sum())
    return (float((heat * cols).sum()) / total,
            float((heat * rows).sum()) / total)


def test_swipe_directions() -> None:
    """Make sure that the swipes move the blob the right way."""
    for cls, axis, sign in ((1, 0, -1), (2, 0, 1), (3, 1, -1), (4, 1, 1)):
        clip = render_clip(recipe(cls))
        before = centroid(clip.frames[10])[axis]
        after = centroid(clip.frames[29])[axis]
        assert sign * (after - before) > 5.0, cls


def test_nuclei_are_bright_frames() -> None:
    """Make sure that the nuclei are exactly the frames above half peak."""
    for cls in range(1, N_CLASSES):
        clip = render_clip(recipe(cls))
        assert clip.labels == (cls, )
        peak = (clip.frames - 24.0).max(axis=(1, 2))
        assert_array_equal(np.flatnonzero(peak > 5.0), np.arange(10, 30))


def test_random_clips() -> None:
    """Test the shapes, labels, and determinism of random clips."""
    params: Final[GeneratorParams] = GeneratorParams(double_prob=0.5)
    for cls in range(N_CLASSES):
        for seed in range(5):
            clip = generate_clip(cls, np.random.default_rng(seed), params)
            assert clip.frames.shape == (48, 24, 32)
            assert clip.fps == 16.0
            assert len(clip.nuclei) == len(clip.labels)
            assert (clip.cls == cls) and all(
                lb == cls for lb in clip.labels)
            assert (cls == 0) == (len(clip.labels) == 0)
            for n in clip.nuclei:
                assert 2 <= n.start < n.end <= 46
            again = generate_clip(cls, np.random.default_rng(seed), params)
            assert_array_equal(again.frames, clip.frames)


def test_parameters() -> None:
    """Test the parameter validation and the dictionary form."""
    p: Final[GeneratorParams] = GeneratorParams(n_frames=64, noise=(0, 1))
    assert GeneratorParams.from_dict(p.to_dict()) == p
    with pytest.raises(ValueError):
        GeneratorParams(n_frames=20)
    with pytest.raises(ConfigError):
        GeneratorParams(background=(30.0, 20.0))
