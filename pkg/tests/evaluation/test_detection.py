"""Test event matching, the mAP, and the stitched test video."""

from typing import Final

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pycommons.io.temp import temp_dir

from thermogest.data.clip import Nucleus, ThermalClip
from thermogest.data.generator import generate_clip
from thermogest.errors import DataError
from thermogest.evaluation.detection import (
    RECALL_GRID,
    PrCurve,
    delta_sweep,
    map_score,
    match_events,
    network_detector,
    oracle_detector,
    pr_table,
    stitch_test_video,
    write_pr_table,
)
from thermogest.inference.streaming import DetectionEvent
from thermogest.model.encoder import EncoderConfig
from thermogest.model.network import GestureNet
from thermogest.model.tcn import TcnConfig


def test_matching() -> None:
    """Test the greedy matching of events against nuclei."""
    nuclei: Final[list[Nucleus]] = [
        Nucleus(10, 20, 1), Nucleus(30, 40, 2), Nucleus(50, 60, 1)]
    events: Final[list[DetectionEvent]] = [
        DetectionEvent(12, 1, 0.6), DetectionEvent(15, 1, 0.9),
        DetectionEvent(35, 1, 0.8), DetectionEvent(20, 1, 0.7),
        DetectionEvent(39, 2, 0.5), DetectionEvent(5, 2, 0.95)]
    r = match_events(events, nuclei)
    assert r.true_positive == (False, True, False, False, True, False)
    assert r.matched == (True, True, False)
    assert (r.tp, r.fp, r.fn) == (2, 4, 1)
    tie = match_events([DetectionEvent(14, 1, 0.5),
                        DetectionEvent(11, 1, 0.5)], nuclei)
    assert tie.true_positive == (False, True)
    with pytest.raises(DataError):
        match_events([], [Nucleus(0, 5, 1), Nucleus(4, 8, 1)])


def test_average_precision() -> None:
    """Test the interpolated average precision of known rankings."""
    nuclei: Final[list[Nucleus]] = [Nucleus(0, 10, 1), Nucleus(20, 30, 1)]
    half: Final = map_score([DetectionEvent(5, 1, 0.9),
                             DetectionEvent(15, 1, 0.8)], nuclei, (1, ))
    assert abs(half.map - 51 / 101) < 1e-12
    late: Final = map_score([DetectionEvent(15, 1, 0.9),
                             DetectionEvent(5, 1, 0.8),
                             DetectionEvent(25, 1, 0.7)], nuclei, (1, ))
    assert_allclose(late.curves[0].precision, np.full(RECALL_GRID.size,
                                                      2 / 3))
    assert map_score([], nuclei, (1, )).map == 0.0
    assert map_score([DetectionEvent(1, 1, 0.2),
                      DetectionEvent(21, 1, 0.1)], nuclei, (1, )).map == 1.0


def test_classes() -> None:
    """Test the averaging over classes and the excluded classes."""
    nuclei: Final[list[Nucleus]] = [Nucleus(0, 10, 1), Nucleus(20, 30, 4)]
    r = map_score([DetectionEvent(5, 1, 0.9)], nuclei)
    assert [c.cls for c in r.curves] == [1, 4]
    assert r.excluded == (2, 3, 5, 6, 7, 8, 9)
    assert abs(r.map - 0.5) < 1e-12
    assert [round(c.ap, 6) for c in r.curves] == [1.0, 0.0]
    with pytest.raises(DataError):
        map_score([DetectionEvent(5, 1, 0.9)], nuclei, (2, 3))
    with pytest.raises(DataError):
        PrCurve(1, np.linspace(0.0, 1.0, 101))


def test_stitching() -> None:
    """Test the offsets of the nuclei in a stitched video."""
    clips: Final[list[ThermalClip]] = [
        ThermalClip(np.full((10 + i, 4, 4), float(i)), (i + 1, ),
                    (Nucleus(2, 5, i + 1), )) for i in range(6)]
    video: Final[ThermalClip] = stitch_test_video(clips, 1.0, 3)
    assert video.n_frames == sum(c.n_frames for c in clips)
    assert len(video.nuclei) == 6
    offset: int = 0
    for n in sorted(video.nuclei, key=lambda x: x.start):
        i = n.cls - 1
        assert float(video.frames[offset, 0, 0]) == float(i)
        assert (n.start, n.end) == (offset + 2, offset + 5)
        offset += 10 + i
    assert stitch_test_video(clips, 0.5, 3).n_frames < video.n_frames
    with pytest.raises(DataError):
        stitch_test_video([clips[0], ThermalClip(np.zeros((3, 5, 4)))])
    with pytest.raises(DataError):
        stitch_test_video([clips[0], ThermalClip(
            np.zeros((3, 4, 4)), fps=8.0)])


def test_sweep() -> None:
    """Test the delta sweep with a perfect and a real detector."""
    clips: Final[list[ThermalClip]] = [
        generate_clip(c, np.random.default_rng(c)) for c in range(10)]
    video: Final[ThermalClip] = stitch_test_video(clips, 1.0)
    rows = delta_sweep(oracle_detector, video, (0, 3))
    assert [(r.delta, r.map, r.events) for r in rows] == [
        (0, 1.0, len(video.nuclei)), (3, 1.0, len(video.nuclei))]
    net = GestureNet(EncoderConfig((8, 8), (24, 32), ((4, 2), (8, 2))),
                     TcnConfig(1, 2, 4, 8, 10, 1), seed=1)
    rows = delta_sweep(network_detector(net, 16, 0.0), video, (1, ))
    assert 0.0 <= rows[0].map <= 1.0


def test_pr_table() -> None:
    """Write the curves of a result to a file."""
    r = map_score([DetectionEvent(5, 2, 0.9)], [Nucleus(0, 10, 2)], (2, ))
    lines: Final[list[str]] = pr_table(r)
    assert len(lines) == 102
    assert lines[0] == "recall;class_2;mean"
    assert lines[-1] == "1.00;1.000000;1.000000"
    with temp_dir() as td:
        path = write_pr_table(td.resolve_inside("pr.csv"), r)
        assert path.read_all_str().splitlines() == lines


def random_annotation(seed: int) -> tuple[list[Nucleus],
                                          list[DetectionEvent]]:
    """
    Draw disjoint nuclei and events with distinct scores.

    :param seed: the seed
    :return: the nuclei and the events
    """
    rng: Final[np.random.Generator] = np.random.default_rng(seed)
    nuclei: Final[list[Nucleus]] = []
    end: int = 0
    for _ in range(int(rng.integers(3, 9))):
        start = end + int(rng.integers(0, 6))
        end = start + int(rng.integers(1, 9))
        nuclei.append(Nucleus(start, end, int(rng.integers(1, 4))))
    n_events: Final[int] = int(rng.integers(1, 20))
    scores: Final[np.ndarray] = rng.permutation(n_events) / n_events + 0.01
    events: Final[list[DetectionEvent]] = [
        DetectionEvent(int(rng.integers(0, end + 3)),
                       int(rng.integers(1, 4)), float(s)) for s in scores]
    return nuclei, events


def test_monotone_score_transform() -> None:
    """Make sure that only the ranking of the scores matters."""
    for seed in range(30):
        nuclei, events = random_annotation(seed)
        base = map_score(events, nuclei, (1, 2, 3))
        for f in (lambda s: s ** 3, lambda s: 0.2 + s / 10.0,
                  lambda s: float(np.exp(5.0 * s)) / 200.0):
            moved = map_score([DetectionEvent(e.frame, e.cls, f(e.score))
                               for e in events], nuclei, (1, 2, 3))
            assert moved.map == base.map
            for a, b in zip(moved.curves, base.curves):
                assert_allclose(a.precision, b.precision)


def test_lowest_false_positive() -> None:
    """Make sure that a false positive ranked last never raises the AP."""
    for seed in range(30):
        nuclei, events = random_annotation(seed)
        base = map_score(events, nuclei, (1, 2, 3))
        lowest = min(e.score for e in events)
        after = nuclei[-1].end + 1
        for cls in (1, 2, 3):
            more = map_score([*events, DetectionEvent(
                after, cls, lowest / 2.0)], nuclei, (1, 2, 3))
            assert more.map <= base.map + 1e-12
            for a, b in zip(more.curves, base.curves):
                assert np.all(a.precision <= b.precision + 1e-12)


def test_event_order() -> None:
    """Make sure that matching does not depend on the event order."""
    rng: Final[np.random.Generator] = np.random.default_rng(11)
    for seed in range(30):
        nuclei, events = random_annotation(seed)
        base = match_events(events, nuclei)
        score = map_score(events, nuclei, (1, 2, 3)).map
        for _ in range(3):
            perm = rng.permutation(len(events))
            r = match_events([events[i] for i in perm], nuclei)
            assert r.matched == base.matched
            assert r.true_positive == tuple(
                base.true_positive[i] for i in perm)
            assert map_score([events[i] for i in perm], nuclei,
                             (1, 2, 3)).map == score
