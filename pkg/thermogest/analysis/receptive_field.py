"""
The temporal receptive field of the temporal convolution network.

Every basic block widens the receptive field of an output frame. A
non-causal block with dilation `d` reads the frames `t - d`, `t`, and
`t + d`, so it adds `d` frames of lookahead and `d` frames of lookback. A
causal block reads `t - 2d`, `t - d`, and `t`, so it adds `2d` frames of
lookback and no lookahead. :func:`lookahead` sums these contributions.

:func:`probe_dependencies` measures the same quantities on an actual
graph: it initializes all weights and inputs strictly positive, so that
every ReLU stays in its linear regime, back-propagates a unit gradient
from one central output frame, and reads off which input frames receive a
nonzero gradient.

>>> lookahead(TcnConfig(4, 5, non_causal=5))
ReceptiveField(lookahead=124, lookback=124)
>>> lookahead(TcnConfig(4, 4, non_causal=2))
ReceptiveField(lookahead=12, lookback=108)
>>> probe_dependencies(build_bb(4, 4, False)).lookahead
4
"""
from dataclasses import dataclass
from typing import Final

import numpy as np
from pycommons.types import check_int_range, type_error

from thermogest.errors import ConfigError, InconclusiveProbeError
from thermogest.model.graph import (
    INIT_POSITIVE,
    KIND_CONV1D,
    KIND_SOFTMAX,
    LayerGraph,
    backward,
    forward,
    init_params,
)
from thermogest.model.tcn import TcnConfig, build_bb, tcn_graph


@dataclass(frozen=True, order=True)
class ReceptiveField:
    """The frames an output frame depends on, relative to its position."""

    #: the number of future frames
    lookahead: int
    #: the number of past frames
    lookback: int

    def __post_init__(self) -> None:
        """Validate the receptive field."""
        check_int_range(self.lookahead, "lookahead", 0, 1_000_000_000)
        check_int_range(self.lookback, "lookback", 0, 1_000_000_000)

    @property
    def total(self) -> int:
        """
        Get the number of frames in the receptive field.

        :return: `lookahead + lookback + 1`

        >>> ReceptiveField(1, 2).total
        4
        """
        return self.lookahead + self.lookback + 1


def lookahead(config: TcnConfig) -> ReceptiveField:
    """
    Compute the receptive field of a temporal network in closed form.

    :param config: the configuration
    :return: the receptive field

    >>> lookahead(TcnConfig(4, 4, non_causal=0))
    ReceptiveField(lookahead=0, lookback=120)
    >>> [lookahead(TcnConfig(4, 4, non_causal=m)).lookahead
    ...  for m in (1, 2, 3)]
    [4, 12, 28]
    """
    if not isinstance(config, TcnConfig):
        raise type_error(config, "config", TcnConfig)
    ahead: int = 0
    back: int = 0
    for causal, d in zip(config.block_modes(), config.dilations()):
        if causal:
            back += 2 * d
        else:
            ahead += d
            back += d
    return ReceptiveField(config.stages * ahead, config.stages * back)


def graph_extent(graph: LayerGraph) -> int:
    """
    Get an upper bound for the lookahead and lookback of a graph.

    :param graph: the temporal graph
    :return: the sum of twice the dilation of all temporal convolutions

    >>> graph_extent(build_bb(8, 4, True))
    8
    """
    return sum(2 * layer.dilation for layer in graph.layers
               if layer.kind == KIND_CONV1D)


def probe_dependencies(graph: LayerGraph | TcnConfig,
                       window: int | None = None,
                       seed: int = 0) -> ReceptiveField:
    """
    Measure the receptive field of a temporal graph by back-propagation.

    :param graph: the temporal graph or a network configuration
    :param window: the number of frames to probe, `None` for a window
        guaranteed to contain the receptive field
    :param seed: the seed for the positive random weights and inputs
    :return: the measured receptive field of the central output frame
    :raises InconclusiveProbeError: if the dependencies reach the window
        border, so the receptive field may extend beyond it
    """
    if isinstance(graph, TcnConfig):
        graph = tcn_graph(graph)
    if not isinstance(graph, LayerGraph):
        raise type_error(graph, "graph", (LayerGraph, TcnConfig))
    g: Final[LayerGraph] = graph.without((KIND_SOFTMAX, ))
    if (len(g) <= 0) or not all(layer.temporal for layer in g.layers):
        raise ConfigError("Only non-empty temporal graphs can be probed.")
    n: Final[int] = (2 * graph_extent(g) + 3) if window is None \
        else check_int_range(window, "window", 1, 1_000_000)
    center: Final[int] = n // 2
    rng: Final[np.random.Generator] = np.random.default_rng(seed)
    params = init_params(g, rng, INIT_POSITIVE, np.float64)
    x: Final[np.ndarray] = rng.uniform(
        0.5, 1.0, size=(1, g.layers[0].in_shape[0], n))
    outs: Final[list[np.ndarray]] = forward(g, params, x)
    dy: Final[np.ndarray] = np.zeros_like(outs[-1])
    dy[0, :, center] = 1.0
    dx: Final[np.ndarray] = backward(g, params, x, outs, dy)
    frames: Final[np.ndarray] = np.flatnonzero(np.any(dx[0] != 0.0, axis=0))
    if (frames.size <= 0) or (frames[0] <= 0) or (frames[-1] >= n - 1):
        raise InconclusiveProbeError(
            f"A window of {n} frames is too short to contain the receptive "
            "field.")
    return ReceptiveField(int(frames[-1]) - center, center - int(frames[0]))


def probe_block(dilation: int, causal: bool) -> ReceptiveField:
    """
    Measure the receptive field of a single basic block.

    :param dilation: the dilation
    :param causal: is the block causal?
    :return: the receptive field

    >>> probe_block(1, True)
    ReceptiveField(lookahead=0, lookback=2)
    """
    return probe_dependencies(build_bb(4, dilation, causal))
