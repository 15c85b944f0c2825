"""
The complete gesture network: a spatial encoder feeding a temporal network.

:func:`assemble_model` joins the layer graphs of both parts.
:class:`GestureNet` binds such a graph to its parameters. It encodes every
frame on its own and then runs the temporal network over the resulting
`[C, N]` feature map. For training, it keeps the intermediate results of a
batch of clips so that the gradients of a loss with respect to the
per-frame logits can be pushed back through both parts.
"""
from dataclasses import dataclass
from typing import Any, Final

import numpy as np
from pycommons.types import type_error

from thermogest.errors import ConfigError
from thermogest.model import numerics as nm
from thermogest.model.encoder import EncoderConfig, encoder_graph, \
    prepare_frames
from thermogest.model.graph import (
    INIT_HE,
    KIND_SOFTMAX,
    LayerGraph,
    backward,
    forward,
    init_params,
)
from thermogest.model.params import ParamStore
from thermogest.model.tcn import TcnConfig, tcn_graph


def assemble_model(encoder: EncoderConfig, tcn: TcnConfig) -> LayerGraph:
    """
    Join the encoder and the temporal network into one graph.

    :param encoder: the encoder configuration
    :param tcn: the temporal network configuration
    :return: the graph mapping frames to per-frame class probabilities
    :raises ConfigError: if the embedding dimensions do not match

    >>> g = assemble_model(EncoderConfig(), TcnConfig(2, 4, 32, 64, 10, 2))
    >>> g.layers[0].name, g.layers[-1].name
    ('enc.c0', 'tcn.softmax')
    """
    if encoder.embedding_dim != tcn.input_dim:
        raise ConfigError(
            f"The encoder produces {encoder.embedding_dim}-dimensional "
            f"embeddings but the temporal network expects {tcn.input_dim}.")
    return LayerGraph.concat(encoder_graph(encoder), tcn_graph(tcn))


@dataclass(frozen=True)
class Cache:
    """The intermediate results of a training forward pass."""

    #: the encoder input of shape `[B * T, 1, H, W]`
    frames: np.ndarray
    #: the encoder layer outputs
    enc_outs: list[np.ndarray]
    #: the temporal input of shape `[B, C, T]`
    embeddings: np.ndarray
    #: the temporal layer outputs
    tcn_outs: list[np.ndarray]


class GestureNet:
    """A gesture network with its parameters."""

    def __init__(self, encoder: EncoderConfig, tcn: TcnConfig,
                 params: ParamStore | None = None, seed: int = 0,
                 dtype: Any = np.float32) -> None:
        """
        Create the network.

        :param encoder: the encoder configuration
        :param tcn: the temporal network configuration
        :param params: the parameters, or `None` to initialize them
        :param seed: the seed for the parameter initialization
        :param dtype: the floating point type of new parameters
        """
        if not isinstance(encoder, EncoderConfig):
            raise type_error(encoder, "encoder", EncoderConfig)
        if not isinstance(tcn, TcnConfig):
            raise type_error(tcn, "tcn", TcnConfig)
        #: the encoder configuration
        self.encoder: Final[EncoderConfig] = encoder
        #: the temporal network configuration
        self.tcn: Final[TcnConfig] = tcn
        #: the complete graph
        self.graph: Final[LayerGraph] = assemble_model(encoder, tcn)
        #: the encoder part
        self.frame_graph: Final[LayerGraph] = self.graph.frame_part()
        #: the temporal part without the final softmax
        self.logit_graph: Final[LayerGraph] = \
            self.graph.temporal_part().without((KIND_SOFTMAX, ))
        if params is None:
            params = init_params(self.graph, np.random.default_rng(seed),
                                 INIT_HE, dtype)
        elif set(params.names()) != set(self.graph.param_shapes().keys()):
            raise ConfigError("The parameters do not match the network.")
        #: the parameters
        self.params: Final[ParamStore] = params

    @property
    def dtype(self) -> Any:
        """
        Get the floating point type of the network.

        :return: the floating point type
        """
        return self.params.value("enc.c0.w").dtype

    def embed(self, frames: np.ndarray) -> np.ndarray:
        """
        Encode each of a sequence of normalized frames.

        :param frames: the frames of shape `[T, H, W]`
        :return: the embeddings of shape `[T, C]`
        """
        return forward(self.frame_graph, self.params, prepare_frames(
            frames, self.encoder, self.dtype))[-1]

    def window_logits(self, embeddings: np.ndarray) -> np.ndarray:
        """
        Compute the per-frame logits of a window of embeddings.

        :param embeddings: the embeddings of shape `[N, C]`
        :return: the logits of shape `[N, P]`
        """
        return forward(self.logit_graph, self.params,
                       embeddings.T[None])[-1][0].T

    def window_probabilities(self, embeddings: np.ndarray) -> np.ndarray:
        """
        Compute the per-frame class probabilities of a window.

        :param embeddings: the embeddings of shape `[N, C]`
        :return: the probability sequence of shape `[N, P]`
        """
        return nm.softmax(self.window_logits(embeddings), axis=1)

    def probabilities(self, frames: np.ndarray) -> np.ndarray:
        """
        Compute the per-frame class probabilities of a clip.

        :param frames: the normalized frames of shape `[T, H, W]`
        :return: the probability sequence of shape `[T, P]`
        """
        return self.window_probabilities(self.embed(frames))

    def forward_train(self, frames: np.ndarray) -> tuple[np.ndarray, Cache]:
        """
        Compute the logits of a batch of clips for training.

        :param frames: the normalized frames of shape `[B, T, H, W]`
        :return: the logits of shape `[B, T, P]` and the cache needed by
            :meth:`backward_train`
        """
        if frames.ndim != 4:
            raise ConfigError(
                f"Training batches need shape [B, T, H, W], got "
                f"{frames.shape}.")
        b, t = frames.shape[:2]
        x: Final[np.ndarray] = prepare_frames(frames.reshape(
            b * t, *frames.shape[2:]), self.encoder, self.dtype)
        enc_outs: Final[list[np.ndarray]] = forward(
            self.frame_graph, self.params, x)
        emb: Final[np.ndarray] = np.ascontiguousarray(
            enc_outs[-1].reshape(b, t, -1).transpose(0, 2, 1))
        tcn_outs: Final[list[np.ndarray]] = forward(
            self.logit_graph, self.params, emb)
        return (tcn_outs[-1].transpose(0, 2, 1),
                Cache(x, enc_outs, emb, tcn_outs))

    def backward_train(self, cache: Cache, dlogits: np.ndarray) -> None:
        """
        Accumulate the parameter gradients of a batch.

        :param cache: the cache returned by :meth:`forward_train`
        :param dlogits: the gradient of the loss with respect to the logits,
            of shape `[B, T, P]`
        """
        demb: Final[np.ndarray] = backward(
            self.logit_graph, self.params, cache.embeddings, cache.tcn_outs,
            np.ascontiguousarray(dlogits.transpose(0, 2, 1)).astype(
                self.dtype, copy=False))
        b, c, t = demb.shape
        backward(self.frame_graph, self.params, cache.frames, cache.enc_outs,
                 np.ascontiguousarray(demb.transpose(0, 2, 1)).reshape(
                     b * t, c))
