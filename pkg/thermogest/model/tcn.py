"""
The temporal convolution network on top of the frame embeddings.

A 1x1 convolution compresses the `C` embedding channels to `C'` channels.
Then follow `stages` stages of `blocks` basic blocks each. Block `i` of
every stage uses the dilation `2 ** i`, so the dilation restarts at 1 in
each stage. A basic block is a dilated temporal convolution with kernel
size 3, a ReLU, a 1x1 convolution, and a residual addition of the block
input. In every stage, the first `non_causal` blocks are non-causal and
the remaining ones are causal. A final 1x1 convolution maps to the `P`
classes (including the non-gesture class at index 0) and a softmax turns
each time step into a probability distribution.

>>> cfg = PRESETS["mix2"]
>>> cfg.stages, cfg.blocks, cfg.non_causal
(4, 4, 2)
>>> cfg.block_modes()
(False, False, True, True)
"""
from dataclasses import dataclass
from typing import Any, Final, Mapping

import numpy as np
from pycommons.ds.immutable_map import immutable_mapping
from pycommons.types import check_int_range, type_error

from thermogest.errors import ConfigError
from thermogest.model.graph import (
    Layer,
    LayerGraph,
    add_layer,
    conv1d_layer,
    conv1x1_layer,
    fork_layer,
    forward,
    relu_layer,
    softmax_layer,
)
from thermogest.model.params import ParamStore

#: the index of the non-gesture class, which is also the CTC blank
NON_GESTURE: Final[int] = 0


@dataclass(frozen=True, init=False)
class TcnConfig:
    """The configuration of the temporal convolution network."""

    #: the number of stages
    stages: int
    #: the number of basic blocks per stage
    blocks: int
    #: the number of channels C' inside the network
    channels: int
    #: the embedding dimension C
    input_dim: int
    #: the number of classes P, including the non-gesture class
    classes: int
    #: the number of leading non-causal blocks in each stage
    non_causal: int

    def __init__(self, stages: int = 4, blocks: int = 4, channels: int = 64,
                 input_dim: int = 512, classes: int = 10,
                 non_causal: int = 2) -> None:
        """
        Create the configuration.

        :param stages: the number of stages
        :param blocks: the number of basic blocks per stage
        :param channels: the number of channels C'
        :param input_dim: the embedding dimension C
        :param classes: the number of classes P
        :param non_causal: the number of leading non-causal blocks in each
            stage, `0` for a fully causal and `blocks` for a fully
            non-causal network
        """
        object.__setattr__(self, "stages", check_int_range(
            stages, "stages", 1, 64))
        object.__setattr__(self, "blocks", check_int_range(
            blocks, "blocks", 1, 24))
        object.__setattr__(self, "channels", check_int_range(
            channels, "channels", 1, 65536))
        object.__setattr__(self, "input_dim", check_int_range(
            input_dim, "input_dim", 1, 65536))
        object.__setattr__(self, "classes", check_int_range(
            classes, "classes", 2, 65536))
        object.__setattr__(self, "non_causal", check_int_range(
            non_causal, "non_causal", 0, blocks))

    def block_modes(self) -> tuple[bool, ...]:
        """
        Get the causal mode of the blocks, identical in every stage.

        :return: one `causal` flag per block of a stage
        """
        return tuple(i >= self.non_causal for i in range(self.blocks))

    def dilations(self) -> tuple[int, ...]:
        """
        Get the dilations of the blocks, identical in every stage.

        :return: the dilations `1, 2, 4, ...`

        >>> TcnConfig(blocks=5).dilations()
        (1, 2, 4, 8, 16)
        """
        return tuple(2 ** i for i in range(self.blocks))

    def to_dict(self) -> dict[str, Any]:
        """
        Convert this configuration to a JSON-compatible dictionary.

        :return: the dictionary
        """
        return {"stages": self.stages, "blocks": self.blocks,
                "channels": self.channels, "input_dim": self.input_dim,
                "classes": self.classes, "non_causal": self.non_causal}

    @staticmethod
    def from_dict(data: dict[str, Any] | str) -> "TcnConfig":
        """
        Load a configuration from a dictionary or a preset name.

        :param data: the dictionary or the name of a preset
        :return: the configuration

        >>> TcnConfig.from_dict("f64") == PRESETS["f64"]
        True
        >>> TcnConfig.from_dict({"stages": 2, "blocks": 3}).blocks
        3
        """
        if isinstance(data, str):
            return preset(data)
        if not isinstance(data, dict):
            raise type_error(data, "tcn", (dict, str))
        unknown = set(data.keys()).difference(TcnConfig().to_dict().keys())
        if unknown:
            raise ConfigError(f"Unknown tcn keys {sorted(unknown)}.")
        return TcnConfig(**data)


#: the named configurations of the searched model grid
PRESETS: Final[Mapping[str, TcnConfig]] = immutable_mapping({
    "f64": TcnConfig(4, 5, 64, 512, 10, 5),
    "f128": TcnConfig(4, 5, 128, 512, 10, 5),
    "causal": TcnConfig(4, 5, 64, 512, 10, 0),
    "mix1": TcnConfig(4, 4, 64, 512, 10, 1),
    "mix2": TcnConfig(4, 4, 64, 512, 10, 2),
    "mix3": TcnConfig(4, 4, 64, 512, 10, 3),
    "mini": TcnConfig(2, 4, 32, 64, 10, 2),
})


def preset(name: str) -> TcnConfig:
    """
    Get a preset configuration.

    :param name: the preset name
    :return: the configuration
    """
    if name not in PRESETS:
        raise ConfigError(
            f"Unknown model preset {name!r}, known are {sorted(PRESETS)}.")
    return PRESETS[name]


def build_bb(channels: int, dilation: int, causal: bool,
             name: str = "bb") -> LayerGraph:
    """
    Create the layer graph of one basic block.

    :param channels: the number of channels
    :param dilation: the dilation of the temporal convolution
    :param causal: is the temporal convolution causal?
    :param name: the name prefix of the layers
    :return: the block

    >>> [(la.name, la.kind) for la in build_bb(8, 2, True).layers]
    [('bb.in', 'fork'), ('bb.dil', 'conv1d'), ('bb.relu', 'relu'), \
('bb.pw', 'conv1x1'), ('bb.res', 'add')]
    """
    shape: Final[tuple[int]] = (check_int_range(
        channels, "channels", 1, 65536), )
    fork: Final[Layer] = fork_layer(f"{name}.in", shape, True)
    return LayerGraph((
        fork, conv1d_layer(f"{name}.dil", channels, channels, dilation,
                           causal),
        relu_layer(f"{name}.relu", shape, True),
        conv1x1_layer(f"{name}.pw", channels, channels),
        add_layer(f"{name}.res", shape, fork.name, True)))


def tcn_graph(config: TcnConfig) -> LayerGraph:
    """
    Create the layer graph of the temporal network.

    :param config: the configuration
    :return: the temporal layers, ending in the softmax

    >>> g = tcn_graph(TcnConfig(1, 2, 4, 8, 3, 1))
    >>> g.layers[0].name, g.layers[-2].name, g.layers[-1].name
    ('tcn.in', 'tcn.out', 'tcn.softmax')
    """
    parts: Final[list[LayerGraph]] = [LayerGraph((conv1x1_layer(
        "tcn.in", config.input_dim, config.channels), ))]
    for s in range(config.stages):
        for b, (d, c) in enumerate(zip(config.dilations(),
                                       config.block_modes(), strict=True)):
            parts.append(build_bb(config.channels, d, c, f"tcn.s{s}.b{b}"))
    parts.append(LayerGraph((
        conv1x1_layer("tcn.out", config.channels, config.classes),
        softmax_layer("tcn.softmax", config.classes))))
    return LayerGraph.concat(*parts)


def tcn_forward(embeddings: np.ndarray, config: TcnConfig,
                params: ParamStore,
                graph: LayerGraph | None = None) -> np.ndarray:
    """
    Compute the per-frame class probabilities from a window of embeddings.

    :param embeddings: the embeddings of shape `[C, N]`
    :param config: the configuration
    :param params: the parameters
    :param graph: the graph, or `None` to build it from `config`
    :return: the probability sequence of shape `[N, P]`, each row sums
        to one

    >>> from thermogest.model.graph import init_params
    >>> cfg = TcnConfig(1, 2, 4, 8, 3, 1)
    >>> ps = init_params(tcn_graph(cfg), np.random.default_rng(1))
    >>> p = tcn_forward(np.ones((8, 1), dtype=np.float32), cfg, ps)
    >>> p.shape, bool(abs(float(p.sum()) - 1.0) < 1e-5)
    ((1, 3), True)
    """
    if (embeddings.ndim != 2) or (embeddings.shape[0] != config.input_dim):
        raise ConfigError(
            f"Embeddings must have shape [{config.input_dim}, N], "
            f"got {embeddings.shape}.")
    g: Final[LayerGraph] = tcn_graph(config) if graph is None else graph
    return forward(g, params, embeddings[None])[-1][0].T
