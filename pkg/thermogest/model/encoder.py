"""
The spatial encoder turning each thermal frame into an embedding vector.

The trainable encoder is a small plain convolutional network described by
an :class:`EncoderConfig`. Frames of the sensor geometry (24 rows and 32
columns) are first bilinearly resized to the square encoder input.

Additionally, this module provides a ResNet18 layer graph for 32x32 inputs
which is never executed but only used for computing parameter and FLOP
counts.

>>> cfg = EncoderConfig()
>>> cfg.embedding_dim
64
>>> [layer.name for layer in encoder_graph(cfg).layers]
['enc.c0', 'enc.r0', 'enc.c1', 'enc.r1', 'enc.c2', 'enc.r2', 'enc.gap']
"""
from dataclasses import dataclass
from typing import Any, Final, Iterable

import numpy as np
from pycommons.types import check_int_range, type_error

from thermogest.errors import ConfigError
from thermogest.model import numerics as nm
from thermogest.model.graph import (
    Layer,
    LayerGraph,
    add_layer,
    batchnorm_layer,
    conv2d_layer,
    fork_layer,
    forward,
    gap_layer,
    linear_layer,
    relu_layer,
)
from thermogest.model.params import ParamStore

#: the height of a sensor frame
SENSOR_HEIGHT: Final[int] = 24
#: the width of a sensor frame
SENSOR_WIDTH: Final[int] = 32


@dataclass(frozen=True, init=False)
class EncoderConfig:
    """The configuration of the trainable spatial encoder."""

    #: the height and width of the frames fed into the encoder
    input_size: tuple[int, int]
    #: the height and width of the raw frames
    frame_size: tuple[int, int]
    #: the output channels and stride of each 3x3 convolution
    channels: tuple[tuple[int, int], ...]

    def __init__(self, input_size: Iterable[int] = (32, 32),
                 frame_size: Iterable[int] = (SENSOR_HEIGHT, SENSOR_WIDTH),
                 channels: Iterable[Iterable[int]] = (
                     (16, 1), (32, 2), (64, 2))) -> None:
        """
        Create the encoder configuration.

        :param input_size: the height and width of the encoder input
        :param frame_size: the height and width of the raw frames
        :param channels: the `(out_channels, stride)` pair of each
            convolution
        """
        ins: Final[tuple[int, ...]] = tuple(input_size)
        fs: Final[tuple[int, ...]] = tuple(frame_size)
        if (len(ins) != 2) or (len(fs) != 2):
            raise ConfigError(
                f"Sizes must be (height, width), got {ins} and {fs}.")
        for v in (*ins, *fs):
            check_int_range(v, "size", 1, 4096)
        plan: Final[tuple[tuple[int, int], ...]] = tuple(
            tuple(c) for c in channels)  # type: ignore[misc]
        if len(plan) <= 0:
            raise ConfigError("The encoder needs at least one convolution.")
        for c in plan:
            if len(c) != 2:
                raise ConfigError(f"Invalid channel plan entry {c}.")
            check_int_range(c[0], "out_channels", 1, 4096)
            if c[1] not in {1, 2}:
                raise ConfigError(f"Stride must be 1 or 2, got {c[1]}.")
        object.__setattr__(self, "input_size", ins)
        object.__setattr__(self, "frame_size", fs)
        object.__setattr__(self, "channels", plan)

    @property
    def embedding_dim(self) -> int:
        """
        Get the dimension C of the embedding.

        :return: the number of output channels of the last convolution
        """
        return self.channels[-1][0]

    def to_dict(self) -> dict[str, Any]:
        """
        Convert this configuration to a JSON-compatible dictionary.

        :return: the dictionary
        """
        return {"input_size": list(self.input_size),
                "frame_size": list(self.frame_size),
                "channels": [list(c) for c in self.channels]}

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "EncoderConfig":
        """
        Load a configuration from a dictionary.

        :param data: the dictionary
        :return: the configuration

        >>> c = EncoderConfig(channels=((8, 2), ))
        >>> EncoderConfig.from_dict(c.to_dict()) == c
        True
        """
        if not isinstance(data, dict):
            raise type_error(data, "encoder", dict)
        unknown = set(data.keys()).difference(
            {"input_size", "frame_size", "channels"})
        if unknown:
            raise ConfigError(f"Unknown encoder keys {sorted(unknown)}.")
        return EncoderConfig(**data)


def encoder_graph(config: EncoderConfig) -> LayerGraph:
    """
    Create the layer graph of the trainable encoder.

    :param config: the encoder configuration
    :return: the frame layers mapping `(1, H, W)` inputs to embeddings
    """
    layers: Final[list[Layer]] = []
    shape: tuple[int, ...] = (1, *config.input_size)
    for i, (ch, stride) in enumerate(config.channels):
        conv = conv2d_layer(f"enc.c{i}", shape, ch, 3, stride)
        shape = conv.out_shape
        layers.append(conv)
        layers.append(relu_layer(f"enc.r{i}", shape, False))
    layers.append(gap_layer("enc.gap", shape))
    return LayerGraph(layers)


def resize_matrix(size_in: int, size_out: int) -> np.ndarray:
    """
    Get the matrix of a 1D bilinear resize with half-pixel centers.

    :param size_in: the input length
    :param size_out: the output length
    :return: the matrix `R` of shape `[size_out, size_in]` such that
        `R @ x` is the resized vector

    >>> resize_matrix(2, 4).tolist()
    [[1.0, 0.0], [0.75, 0.25], [0.25, 0.75], [0.0, 1.0]]
    >>> resize_matrix(3, 3).tolist()
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    """
    check_int_range(size_in, "size_in", 1, 4096)
    check_int_range(size_out, "size_out", 1, 4096)
    src: Final[np.ndarray] = np.clip(
        (np.arange(size_out) + 0.5) * (size_in / size_out) - 0.5,
        0, size_in - 1)
    lo: Final[np.ndarray] = np.floor(src).astype(int)
    hi: Final[np.ndarray] = np.minimum(lo + 1, size_in - 1)
    frac: Final[np.ndarray] = src - lo
    mat: Final[np.ndarray] = np.zeros((size_out, size_in))
    rows: Final[np.ndarray] = np.arange(size_out)
    np.add.at(mat, (rows, lo), 1.0 - frac)
    np.add.at(mat, (rows, hi), frac)
    return mat


def resize_frames(frames: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """
    Bilinearly resize frames.

    :param frames: the frames of shape `[..., H, W]`
    :param size: the target height and width
    :return: the resized frames of shape `[..., size[0], size[1]]`, in the
        floating point type of the input

    >>> resize_frames(np.ones((2, 24, 32), dtype=np.float32), (32, 32)).shape
    (2, 32, 32)
    """
    h, w = frames.shape[-2:]
    if (h, w) == tuple(size):
        return frames
    ry: Final[np.ndarray] = resize_matrix(h, size[0]).astype(frames.dtype)
    rx: Final[np.ndarray] = resize_matrix(w, size[1]).astype(frames.dtype)
    return ry @ frames @ rx.T


def prepare_frames(frames: np.ndarray, config: EncoderConfig,
                   dtype: Any = np.float32) -> np.ndarray:
    """
    Check and resize normalized frames for the encoder.

    :param frames: the frames of shape `[T, H, W]` or `[H, W]`
    :param config: the encoder configuration
    :param dtype: the floating point type of the network
    :return: the batched encoder input of shape `[T, 1, H', W']`
    :raises NumericError: if the frames contain NaN or infinite values
    """
    if not isinstance(frames, np.ndarray):
        raise type_error(frames, "frames", np.ndarray)
    nm.check_finite(frames, "frame")
    fr: Final[np.ndarray] = frames[None] if frames.ndim == 2 else frames
    if (fr.ndim != 3) or (tuple(fr.shape[1:]) not in {
            config.frame_size, config.input_size}):
        raise ConfigError(
            f"Frames of shape {frames.shape} do not fit the encoder with "
            f"frame size {config.frame_size}.")
    return resize_frames(fr.astype(dtype, copy=False),
                         config.input_size)[:, None]


def encode_frames(frames: np.ndarray, config: EncoderConfig,
                  params: ParamStore, graph: LayerGraph | None = None) \
        -> np.ndarray:
    """
    Encode a sequence of normalized frames.

    Each frame is encoded independently of all others.

    :param frames: the frames of shape `[T, H, W]`
    :param config: the encoder configuration
    :param params: the parameters, containing at least the encoder's
    :param graph: the encoder graph, or `None` to build it
    :return: the embeddings of shape `[T, C]`
    """
    g: Final[LayerGraph] = encoder_graph(config) if graph is None else graph
    x: Final[np.ndarray] = prepare_frames(
        frames, config, params.value(g.layers[0].name + ".w").dtype)
    return forward(g, params, x)[-1]


def encode_frame(frame: np.ndarray, config: EncoderConfig,
                 params: ParamStore, graph: LayerGraph | None = None) \
        -> np.ndarray:
    """
    Encode a single normalized frame into its embedding.

    :param frame: the frame of shape `[1, H, W]` or `[H, W]`
    :param config: the encoder configuration
    :param params: the parameters
    :param graph: the encoder graph, or `None` to build it
    :return: the embedding of shape `[C]`

    >>> from thermogest.model.graph import init_params, INIT_ZEROS
    >>> cfg = EncoderConfig()
    >>> ps = init_params(encoder_graph(cfg), np.random.default_rng(0),
    ...                  INIT_ZEROS)
    >>> e = encode_frame(np.zeros((24, 32)), cfg, ps)
    >>> e.shape, float(np.abs(e).max())
    ((64,), 0.0)
    """
    f: Final[np.ndarray] = frame[0] if frame.ndim == 3 else frame
    return encode_frames(f[None], config, params, graph)[0]


def __basic_block(name: str, shape: tuple[int, int, int], channels: int,
                  stride: int, layers: list[Layer]) -> tuple[int, int, int]:
    """
    Append a ResNet basic block to a layer list.

    :param name: the block name
    :param shape: the input shape
    :param channels: the output channels
    :param stride: the stride of the first convolution
    :param layers: the layer list to append to
    :return: the output shape
    """
    fork: Final[Layer] = fork_layer(f"{name}.in", shape, False)
    layers.append(fork)
    a: Final[Layer] = conv2d_layer(f"{name}.c1", shape, channels, 3, stride,
                                   bias=False)
    out: Final[tuple[int, ...]] = a.out_shape
    layers.extend((a, batchnorm_layer(f"{name}.bn1", out),
                   relu_layer(f"{name}.r1", out, False),
                   conv2d_layer(f"{name}.c2", out, channels, 3, 1,
                                bias=False),
                   batchnorm_layer(f"{name}.bn2", out)))
    skip: str = fork.name
    if (stride != 1) or (shape[0] != channels):
        main: Final[str] = layers[-1].name
        layers.extend((conv2d_layer(f"{name}.proj", shape, channels, 1,
                                    stride, bias=False, source=fork.name),
                       batchnorm_layer(f"{name}.pbn", out)))
        layers.append(add_layer(f"{name}.add", out, main, False))
    else:
        layers.append(add_layer(f"{name}.add", out, skip, False))
    layers.append(relu_layer(f"{name}.r2", out, False))
    return out  # type: ignore[return-value]


def resnet18_descriptor(in_channels: int = 1, classes: int | None = 10,
                        size: int = 32) -> LayerGraph:
    """
    Describe a CIFAR-style ResNet18 for counting purposes.

    The stem is a single 3x3 convolution without pooling, followed by four
    stages of two basic blocks each with 64, 128, 256, and 512 channels.
    All convolutions are followed by batch normalization and have no bias.
    The graph can only be counted, never executed.

    :param in_channels: the number of input channels
    :param classes: the number of outputs of the linear classification
        head, or `None` for a head-less embedding network ending in the
        global average pool
    :param size: the height and width of the input
    :return: the layer graph

    >>> g = resnet18_descriptor()
    >>> g.layers[-1].kind, g.layers[-1].out_shape
    ('linear', (10,))
    >>> resnet18_descriptor(classes=None).layers[-1].out_shape
    (512,)
    """
    check_int_range(in_channels, "in_channels", 1, 16)
    check_int_range(size, "size", 8, 1024)
    layers: Final[list[Layer]] = []
    stem: Final[Layer] = conv2d_layer(
        "rn.stem", (in_channels, size, size), 64, 3, 1, bias=False)
    layers.extend((stem, batchnorm_layer("rn.stem.bn", stem.out_shape),
                   relu_layer("rn.stem.r", stem.out_shape, False)))
    shape: tuple[int, int, int] = stem.out_shape  # type: ignore[assignment]
    for s, channels in enumerate((64, 128, 256, 512)):
        for b in range(2):
            shape = __basic_block(f"rn.s{s}.b{b}", shape, channels,
                                  2 if (s > 0) and (b == 0) else 1, layers)
    layers.append(gap_layer("rn.gap", shape))
    if classes is not None:
        layers.append(linear_layer("rn.fc", shape[0], check_int_range(
            classes, "classes", 1, 100_000)))
    return LayerGraph(layers)
