"""Test the closed-form and the probed receptive field."""
import numpy as np
from pytest import raises

from thermogest.analysis.receptive_field import (
    ReceptiveField,
    graph_extent,
    lookahead,
    probe_block,
    probe_dependencies,
)
from thermogest.errors import ConfigError, DataError, InconclusiveProbeError
from thermogest.model.graph import LayerGraph
from thermogest.model.tcn import PRESETS, TcnConfig, build_bb, tcn_graph


def test_lookahead_of_presets() -> None:
    """The receptive fields of the named configurations."""
    assert lookahead(PRESETS["f64"]) == ReceptiveField(124, 124)
    assert lookahead(PRESETS["f128"]) == ReceptiveField(124, 124)
    assert lookahead(PRESETS["causal"]) == ReceptiveField(0, 248)
    assert lookahead(PRESETS["mix1"]).lookahead == 4
    assert lookahead(PRESETS["mix2"]) == ReceptiveField(12, 108)
    assert lookahead(PRESETS["mix3"]).lookahead == 28
    assert lookahead(PRESETS["mini"]) == ReceptiveField(6, 54)
    assert lookahead(PRESETS["f64"]).total == 249


def test_single_blocks() -> None:
    """A block looks `d` frames both ways or `2d` frames back."""
    for d in (1, 2, 4, 8):
        assert probe_block(d, False) == ReceptiveField(d, d)
        assert probe_block(d, True) == ReceptiveField(0, 2 * d)
    assert graph_extent(build_bb(4, 8, False)) == 16


def test_probe_equals_closed_form_on_presets() -> None:
    """Probing the full-size networks gives the closed form."""
    for name in ("f64", "causal", "mix1", "mix2", "mix3", "mini"):
        config = PRESETS[name]
        assert probe_dependencies(config) == lookahead(config), name


def test_probe_equals_closed_form_on_random_configs() -> None:
    """Probing small random networks gives the closed form."""
    rng = np.random.default_rng(17)
    for _ in range(20):
        blocks = int(rng.integers(1, 5))
        config = TcnConfig(
            stages=int(rng.integers(1, 4)), blocks=blocks,
            channels=int(rng.integers(2, 6)),
            input_dim=int(rng.integers(2, 6)),
            classes=int(rng.integers(2, 4)),
            non_causal=int(rng.integers(0, blocks + 1)))
        seed = int(rng.integers(0, 1000))
        assert probe_dependencies(
            tcn_graph(config), seed=seed) == lookahead(config), config


def test_probe_with_larger_window() -> None:
    """A window wider than needed does not change the result."""
    config = TcnConfig(2, 3, 4, 3, 2, 1)
    expected = lookahead(config)
    assert expected == ReceptiveField(2, 26)
    assert probe_dependencies(config, 101) == expected


def test_probe_window_too_short() -> None:
    """A window that cannot contain the receptive field is detected."""
    config = TcnConfig(1, 2, 3, 3, 2, 2)
    assert probe_dependencies(config) == ReceptiveField(3, 3)
    with raises(InconclusiveProbeError):
        probe_dependencies(config, 5)
    assert issubclass(InconclusiveProbeError, DataError)


def test_bad_probes() -> None:
    """Only temporal graphs can be probed."""
    with raises(TypeError):
        probe_dependencies("f64")  # type: ignore[arg-type]
    with raises(TypeError):
        lookahead("f64")  # type: ignore[arg-type]
    with raises(ConfigError):
        probe_dependencies(LayerGraph(()))
    with raises(ValueError):
        probe_dependencies(PRESETS["mini"], 0)
