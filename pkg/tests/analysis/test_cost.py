"""Test the parameter and FLOP accounting."""

from pytest import raises

from thermogest.analysis.cost import (
    CostReport,
    count,
    layer_cost,
    model_reports,
    resnet_tcn_graph,
)
from thermogest.model.encoder import EncoderConfig, resnet18_descriptor
from thermogest.model.graph import (
    batchnorm_layer,
    conv1d_layer,
    conv1x1_layer,
    conv2d_layer,
    linear_layer,
    relu_layer,
)
from thermogest.model.tcn import PRESETS, TcnConfig, tcn_graph


def test_layer_cost() -> None:
    """Test the cost of single layers."""
    assert layer_cost(conv2d_layer("c", (3, 8, 8), 4, 3, 1)) == (
        112, 112 * 64)
    assert layer_cost(conv2d_layer(
        "c", (3, 8, 8), 4, 3, 2, bias=False)) == (108, 108 * 16)
    assert layer_cost(batchnorm_layer("b", (4, 8, 8))) == (8, 512)
    assert layer_cost(conv1d_layer("t", 5, 6, 2, False)) == (96, 96)
    assert layer_cost(conv1x1_layer("p", 5, 6)) == (36, 36)
    assert layer_cost(linear_layer("l", 10, 3)) == (33, 33)
    assert layer_cost(relu_layer("r", (4, 8, 8), False)) == (0, 0)


def test_temporal_network_counts() -> None:
    """The counts of the reference temporal networks."""
    r64 = count(tcn_graph(PRESETS["f64"]), 48)
    assert (r64.params, r64.flops) == (363722, 17458656)
    r128 = count(tcn_graph(PRESETS["f128"]), 48)
    assert r128.params == 1382794
    assert r128.flops == 48 * 1382794
    assert abs(r128.flops - 66.37e6) < 0.01 * 66.37e6
    assert str(r128).startswith("params=1382794 (1.38M)")


def test_flops_scale_with_steps() -> None:
    """Temporal FLOPs are linear in the number of steps."""
    graph = tcn_graph(PRESETS["mini"])
    one = count(graph, 1)
    for steps in (2, 16, 48):
        r = count(graph, steps)
        assert r.params == one.params
        assert r.flops == steps * one.flops


def test_resnet18_counts() -> None:
    """The ResNet18 descriptor matches the published size."""
    r = count(resnet18_descriptor(), 48)
    assert abs(r.params - 11.17e6) < 0.02 * 11.17e6
    assert abs(r.flops - 556.27e6) < 0.02 * 556.27e6
    # frame layers are counted once
    assert count(resnet18_descriptor(), 1) == CostReport(
        r.params, r.flops, 1)


def test_resnet_tcn_graph() -> None:
    """The head-less encoder is added to the temporal network."""
    tcn = PRESETS["f64"]
    head_less = count(resnet18_descriptor(classes=None), 48)
    t = count(tcn_graph(tcn), 48)
    both = count(resnet_tcn_graph(tcn), 48)
    assert both.params == head_less.params + t.params
    assert both.flops == head_less.flops + t.flops


def test_model_reports() -> None:
    """The reports present depend on the embedding dimension."""
    mini = model_reports(EncoderConfig(), PRESETS["mini"])
    assert set(mini.keys()) == {"tcn", "mini"}
    assert mini["mini"].params > mini["tcn"].params
    assert mini["mini"].flops > mini["tcn"].flops
    f64 = model_reports(EncoderConfig(), PRESETS["f64"], 16)
    assert set(f64.keys()) == {"tcn", "resnet18"}
    assert f64["tcn"].steps == 16
    odd = model_reports(EncoderConfig(), TcnConfig(1, 2, 4, 7, 3, 1))
    assert set(odd.keys()) == {"tcn"}


def test_bad_counts() -> None:
    """Invalid inputs are rejected."""
    with raises(TypeError):
        count("graph", 48)  # type: ignore[arg-type]
    with raises(ValueError):
        count(tcn_graph(PRESETS["mini"]), 0)
    with raises(ValueError):
        CostReport(-1, 0, 1)
