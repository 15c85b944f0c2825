"""Test normalization and augmentation."""

from typing import Final

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from thermogest.data.clip import Nucleus, ThermalClip
from thermogest.data.generator import generate_clip
from thermogest.data.preprocess import (
    NO_AUGMENTATION,
    AugmentParams,
    augment,
    normalize_clip,
    normalize_frames,
    remap_nuclei,
    window_indices,
)
from thermogest.errors import DataError, SkipSample


def test_normalize() -> None:
    """Test the per-clip standardization."""
    clip: Final[ThermalClip] = generate_clip(2, np.random.default_rng(1))
    norm: Final[ThermalClip] = normalize_clip(clip)
    assert norm.frames.dtype == np.float32
    assert abs(float(norm.frames.mean())) < 1e-4
    assert abs(float(norm.frames.std()) - 1.0) < 1e-4
    assert norm.labels == clip.labels
    with pytest.raises(DataError):
        normalize_frames(np.zeros((0, 2, 2)))


def test_no_augmentation() -> None:
    """Make sure that zero magnitudes leave a clip unchanged."""
    clip: Final[ThermalClip] = generate_clip(5, np.random.default_rng(2))
    same: Final[ThermalClip] = augment(clip, NO_AUGMENTATION,
                                       np.random.default_rng(3))
    assert_allclose(same.frames, clip.frames)
    assert same.nuclei == clip.nuclei


def test_augment_keeps_labels() -> None:
    """Test that augmentation changes frames but never labels."""
    params: Final[AugmentParams] = AugmentParams()
    for cls in range(10):
        clip = generate_clip(cls, np.random.default_rng(cls))
        for seed in range(3):
            aug = augment(clip, params, np.random.default_rng(seed), 40)
            assert aug.frames.shape == (40, 24, 32)
            assert aug.labels == clip.labels
            for n in aug.nuclei:
                assert 0 <= n.start < n.end <= 40
        a1 = augment(clip, params, np.random.default_rng(7))
        a2 = augment(clip, params, np.random.default_rng(7))
        assert_array_equal(a1.frames, a2.frames)


def test_too_short() -> None:
    """Make sure that too short clips are skipped."""
    clip: Final[ThermalClip] = ThermalClip(np.zeros((10, 4, 4)))
    with pytest.raises(SkipSample):
        augment(clip, AugmentParams(scale=0.2), np.random.default_rng(0),
                48)


def test_resampling() -> None:
    """Test the temporal resampling of windows and nuclei."""
    src: Final[np.ndarray] = window_indices(20, 10, 2.0, 0)
    assert_array_equal(src, np.arange(0, 20, 2))
    assert remap_nuclei((Nucleus(4, 8, 3), ), src) == [Nucleus(2, 4, 3)]
    assert remap_nuclei((Nucleus(4, 5, 3), ), window_indices(
        20, 10, 2.0, 5)) == []
