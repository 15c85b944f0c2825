"""
Parameter and FLOP accounting of layer graphs.

One FLOP is counted per weight multiplication and one per bias addition.
Batch normalization costs two FLOPs per element. Activations, residual
additions, pooling, and the softmax are free. Frame layers are counted for
a single frame, because the embeddings of earlier frames are kept, while
temporal layers are counted for every one of the `T` time steps of the
window. For a temporal network, the FLOPs are therefore exactly its
parameter count times `T`.

>>> from thermogest.model.tcn import PRESETS, tcn_graph
>>> r = count(tcn_graph(PRESETS["f64"]), 48)
>>> r.params, r.flops
(363722, 17458656)
>>> str(r)
'params=363722 (0.36M) flops=17458656 (17.46M) T=48'
"""
from dataclasses import dataclass
from typing import Any, Final

import numpy as np
from pycommons.types import check_int_range, type_error

from thermogest.errors import ConfigError
from thermogest.model.encoder import EncoderConfig, resnet18_descriptor
from thermogest.model.graph import (
    KIND_ADD,
    KIND_BATCHNORM,
    KIND_CONV1D,
    KIND_CONV1X1,
    KIND_CONV2D,
    KIND_FORK,
    KIND_GAP,
    KIND_LINEAR,
    KIND_RELU,
    KIND_SOFTMAX,
    Layer,
    LayerGraph,
)
from thermogest.model.network import assemble_model
from thermogest.model.tcn import TcnConfig, tcn_graph

#: the layer kinds without parameters and without FLOPs
FREE_KINDS: Final[frozenset[str]] = frozenset({
    KIND_RELU, KIND_FORK, KIND_ADD, KIND_GAP, KIND_SOFTMAX})


@dataclass(frozen=True)
class CostReport:
    """The parameter and FLOP count of a graph."""

    #: the number of parameters
    params: int
    #: the number of FLOPs for one output over `steps` time steps
    flops: int
    #: the number of time steps
    steps: int

    def __post_init__(self) -> None:
        """Validate the report."""
        check_int_range(self.params, "params", 0, 1 << 62)
        check_int_range(self.flops, "flops", 0, 1 << 62)
        check_int_range(self.steps, "steps", 1, 1_000_000_000)

    def __str__(self) -> str:
        """
        Get the single-line report.

        :return: the report
        """
        return (f"params={self.params} ({self.params / 1e6:.2f}M) "
                f"flops={self.flops} ({self.flops / 1e6:.2f}M) "
                f"T={self.steps}")

    def to_dict(self) -> dict[str, Any]:
        """
        Get the machine-readable record.

        :return: the record
        """
        return {"params": self.params, "flops": self.flops,
                "steps": self.steps}


def layer_cost(layer: Layer) -> tuple[int, int]:
    """
    Count the parameters and the FLOPs of one layer application.

    :param layer: the layer
    :return: the parameter count and the FLOPs for one frame or step

    >>> from thermogest.model.graph import conv2d_layer
    >>> layer_cost(conv2d_layer("c", (1, 4, 4), 2, 3, 1))
    (20, 320)
    """
    kind: Final[str] = layer.kind
    if kind in FREE_KINDS:
        return 0, 0
    if kind == KIND_BATCHNORM:
        return 2 * layer.out_shape[0], 2 * int(np.prod(layer.out_shape))
    params: Final[int] = sum(int(np.prod(s)) for s in
                             layer.param_shapes().values())
    if kind == KIND_CONV2D:
        return params, params * layer.out_shape[1] * layer.out_shape[2]
    if kind in {KIND_CONV1D, KIND_CONV1X1, KIND_LINEAR}:
        return params, params
    raise ConfigError(f"Cannot count layer kind {kind!r}.")


def count(graph: LayerGraph, steps: int = 48) -> CostReport:
    """
    Count the parameters and FLOPs of a graph.

    :param graph: the graph
    :param steps: the number of time steps `T` in the temporal window
    :return: the report

    >>> count(LayerGraph(()), 48).to_dict()
    {'params': 0, 'flops': 0, 'steps': 48}
    """
    if not isinstance(graph, LayerGraph):
        raise type_error(graph, "graph", LayerGraph)
    check_int_range(steps, "steps", 1, 1_000_000_000)
    params: int = 0
    flops: int = 0
    for layer in graph.layers:
        p, f = layer_cost(layer)
        params += p
        flops += (f * steps) if layer.temporal else f
    return CostReport(params, flops, steps)


def resnet_tcn_graph(tcn: TcnConfig) -> LayerGraph:
    """
    Describe a head-less ResNet18 encoder followed by a temporal network.

    :param tcn: the temporal network, which must take 512-dimensional
        embeddings
    :return: the count-only graph
    """
    return LayerGraph.concat(resnet18_descriptor(classes=None),
                             tcn_graph(tcn))


def model_reports(encoder: EncoderConfig, tcn: TcnConfig,
                  steps: int = 48) -> dict[str, CostReport]:
    """
    Count the temporal network alone and in its full networks.

    :param encoder: the mini encoder configuration
    :param tcn: the temporal network configuration
    :param steps: the number of time steps
    :return: the reports of the temporal network `tcn`, the mini encoder
        network `mini`, if its embedding matches, and the ResNet18 network
        `resnet18`, if the network takes 512-dimensional embeddings
    """
    reports: Final[dict[str, CostReport]] = {
        "tcn": count(tcn_graph(tcn), steps)}
    if encoder.embedding_dim == tcn.input_dim:
        reports["mini"] = count(assemble_model(encoder, tcn), steps)
    if tcn.input_dim == resnet18_descriptor(classes=None).layers[
            -1].out_shape[0]:
        reports["resnet18"] = count(resnet_tcn_graph(tcn), steps)
    return reports
