"""Test clips and nuclei with numpy integer indices."""

from typing import Final

import numpy as np
import pytest

from thermogest.data.clip import Nucleus, ThermalClip, check_index
from thermogest.data.generator import generate_clip


def test_check_index() -> None:
    """Make sure that numpy integers become Python integers."""
    for value in (np.int8(4), np.int64(4), np.uint16(4), 4):
        v = check_index(value, "label", 1, 9)
        assert (type(v), v) == (int, 4)
    with pytest.raises(ValueError):
        check_index(np.int64(10), "label", 1, 9)
    with pytest.raises(TypeError):
        check_index(np.float64(4.0), "label", 1, 9)
    with pytest.raises(TypeError):
        check_index("4", "label", 1, 9)


def test_numpy_labels() -> None:
    """Build nuclei and clips from numpy arrays of labels and frames."""
    bounds: Final[np.ndarray] = np.array([[2, 5, 3], [7, 9, 1]])
    nuclei: Final[list[Nucleus]] = [Nucleus(*row) for row in bounds]
    assert nuclei == [Nucleus(2, 5, 3), Nucleus(7, 9, 1)]
    assert all(type(n.start) is int for n in nuclei)
    clip: Final[ThermalClip] = ThermalClip(
        np.zeros((12, 4, 4)), np.array([3, 1]), nuclei)
    assert clip.labels == (3, 1)
    assert all(type(lb) is int for lb in clip.labels)
    drawn: Final[ThermalClip] = generate_clip(
        np.int64(2), np.random.default_rng(1))
    assert drawn.labels[0] == 2
