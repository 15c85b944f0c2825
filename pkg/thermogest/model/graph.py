"""
Declarative layer graphs and their execution.

A :class:`LayerGraph` is an ordered tuple of :class:`Layer` descriptors.
Each layer reads the output of its predecessor, or, if it names a
`source`, the output of that earlier layer. An `add` layer additionally
adds the output of the layer named by its `skip` field, which realizes
residual links. A `fork` layer is an identity marking the start of such a
link.

Frame layers (`temporal=False`) describe the spatial encoder and have
shapes `(C, H, W)`, or `(C,)` after pooling. Temporal layers
(`temporal=True`) have shapes `(C,)` per time step. Every trainable layer
owns the :class:`~thermogest.model.params.ParamStore` entries
`<name>.w` and, if it has a bias, `<name>.b`; batch normalization layers
own `<name>.gamma` and `<name>.beta`.

:func:`forward` evaluates a graph on a batch and returns the outputs of
all layers. :func:`backward` chains the hand-written backward passes of
:mod:`~thermogest.model.numerics` in reverse order over these outputs and
accumulates the parameter gradients.
"""
from dataclasses import dataclass
from itertools import chain
from typing import Final, Iterable

import numpy as np
from pycommons.types import check_int_range, type_error

from thermogest.errors import ConfigError
from thermogest.model import numerics as nm
from thermogest.model.params import ParamStore

#: a 2D convolution over a frame
KIND_CONV2D: Final[str] = "conv2d"
#: a batch normalization, only used in counting descriptors
KIND_BATCHNORM: Final[str] = "batchnorm"
#: a fully connected layer, only used in counting descriptors
KIND_LINEAR: Final[str] = "linear"
#: the rectified linear unit
KIND_RELU: Final[str] = "relu"
#: the identity marking the start of a residual link
KIND_FORK: Final[str] = "fork"
#: the residual addition
KIND_ADD: Final[str] = "add"
#: the global average pool turning a frame into an embedding
KIND_GAP: Final[str] = "gap"
#: the dilated temporal convolution with kernel size 3
KIND_CONV1D: Final[str] = "conv1d"
#: the pointwise temporal convolution
KIND_CONV1X1: Final[str] = "conv1x1"
#: the softmax over the channels of each time step
KIND_SOFTMAX: Final[str] = "softmax"

#: all layer kinds
KINDS: Final[frozenset[str]] = frozenset({
    KIND_CONV2D, KIND_BATCHNORM, KIND_LINEAR, KIND_RELU, KIND_FORK,
    KIND_ADD, KIND_GAP, KIND_CONV1D, KIND_CONV1X1, KIND_SOFTMAX})


@dataclass(frozen=True, init=False)
class Layer:
    """An immutable descriptor of one layer."""

    #: the kind of the layer
    kind: str
    #: the unique name of the layer
    name: str
    #: the input shape
    in_shape: tuple[int, ...]
    #: the output shape
    out_shape: tuple[int, ...]
    #: does the layer work on time steps?
    temporal: bool
    #: the kernel size
    kernel: int
    #: the spatial stride
    stride: int
    #: the temporal dilation
    dilation: int
    #: is the temporal kernel causal?
    causal: bool
    #: does the layer have a bias?
    bias: bool
    #: the layer whose output is read instead of the predecessor's
    source: str | None
    #: the layer whose output is added, for `add` layers
    skip: str | None

    def __init__(self, kind: str, name: str, in_shape: Iterable[int],
                 out_shape: Iterable[int], temporal: bool = False,
                 kernel: int = 1, stride: int = 1, dilation: int = 1,
                 causal: bool = False, bias: bool = True,
                 source: str | None = None,
                 skip: str | None = None) -> None:
        """
        Create the layer descriptor.

        :param kind: the kind of the layer
        :param name: the unique name of the layer
        :param in_shape: the input shape
        :param out_shape: the output shape
        :param temporal: does the layer work on time steps?
        :param kernel: the kernel size
        :param stride: the spatial stride
        :param dilation: the temporal dilation
        :param causal: is the temporal kernel causal?
        :param bias: does the layer have a bias?
        :param source: the layer whose output is read instead of the
            predecessor's output
        :param skip: the layer whose output is added, for `add` layers
        """
        if kind not in KINDS:
            raise ConfigError(f"Unknown layer kind {kind!r}.")
        if not isinstance(name, str):
            raise type_error(name, "name", str)
        if not isinstance(temporal, bool):
            raise type_error(temporal, "temporal", bool)
        if not isinstance(causal, bool):
            raise type_error(causal, "causal", bool)
        if not isinstance(bias, bool):
            raise type_error(bias, "bias", bool)
        if (kind == KIND_ADD) != (skip is not None):
            raise ConfigError(f"Layer {name!r}: only add layers have skips.")
        ins: Final[tuple[int, ...]] = tuple(in_shape)
        outs: Final[tuple[int, ...]] = tuple(out_shape)
        for s in chain(ins, outs):
            check_int_range(s, "shape dimension", 1, 1_000_000_000)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "in_shape", ins)
        object.__setattr__(self, "out_shape", outs)
        object.__setattr__(self, "temporal", temporal)
        object.__setattr__(self, "kernel", check_int_range(
            kernel, "kernel", 1, 15))
        object.__setattr__(self, "stride", check_int_range(
            stride, "stride", 1, 2))
        object.__setattr__(self, "dilation", check_int_range(
            dilation, "dilation", 1, 1_000_000))
        object.__setattr__(self, "causal", causal)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "skip", skip)

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        """
        Get the shapes of the parameters owned by this layer.

        :return: a mapping of full parameter names to shapes

        >>> conv1d_layer("x", 4, 8, 2, True).param_shapes()
        {'x.w': (8, 4, 3), 'x.b': (8,)}
        >>> relu_layer("r", (4,), True).param_shapes()
        {}
        """
        cin: Final[int] = self.in_shape[0]
        cout: Final[int] = self.out_shape[0]
        shapes: dict[str, tuple[int, ...]] = {}
        if self.kind == KIND_CONV2D:
            shapes[f"{self.name}.w"] = (cout, cin, self.kernel, self.kernel)
        elif self.kind == KIND_CONV1D:
            shapes[f"{self.name}.w"] = (cout, cin, nm.TEMPORAL_KERNEL)
        elif self.kind in {KIND_CONV1X1, KIND_LINEAR}:
            shapes[f"{self.name}.w"] = (cout, cin)
        elif self.kind == KIND_BATCHNORM:
            return {f"{self.name}.gamma": (cout, ),
                    f"{self.name}.beta": (cout, )}
        else:
            return shapes
        if self.bias:
            shapes[f"{self.name}.b"] = (cout, )
        return shapes


def conv2d_layer(name: str, in_shape: tuple[int, int, int], channels: int,
                 kernel: int = 3, stride: int = 1,
                 bias: bool = True, source: str | None = None) -> Layer:
    """
    Describe a zero-padded 2D convolution.

    :param name: the layer name
    :param in_shape: the input shape `(C, H, W)`
    :param channels: the number of output channels
    :param kernel: the odd kernel size
    :param stride: the stride
    :param bias: does the convolution have a bias?
    :param source: the layer whose output is read, if not the predecessor
    :return: the layer

    >>> conv2d_layer("c", (1, 32, 24), 16, 3, 2).out_shape
    (16, 16, 12)
    """
    c, h, w = in_shape
    return Layer(KIND_CONV2D, name, in_shape,
                 (channels, -(-h // stride), -(-w // stride)),
                 kernel=kernel, stride=stride, bias=bias, source=source)


def batchnorm_layer(name: str, shape: tuple[int, ...]) -> Layer:
    """
    Describe a batch normalization, which is only ever counted.

    :param name: the layer name
    :param shape: the shape
    :return: the layer
    """
    return Layer(KIND_BATCHNORM, name, shape, shape, bias=False)


def linear_layer(name: str, inputs: int, outputs: int) -> Layer:
    """
    Describe a fully connected layer, which is only ever counted.

    :param name: the layer name
    :param inputs: the number of inputs
    :param outputs: the number of outputs
    :return: the layer
    """
    return Layer(KIND_LINEAR, name, (inputs, ), (outputs, ))


def relu_layer(name: str, shape: tuple[int, ...], temporal: bool) -> Layer:
    """
    Describe a rectified linear unit.

    :param name: the layer name
    :param shape: the shape
    :param temporal: is it part of the temporal network?
    :return: the layer
    """
    return Layer(KIND_RELU, name, shape, shape, temporal=temporal,
                 bias=False)


def fork_layer(name: str, shape: tuple[int, ...], temporal: bool) -> Layer:
    """
    Describe the identity at the start of a residual link.

    :param name: the layer name
    :param shape: the shape
    :param temporal: is it part of the temporal network?
    :return: the layer
    """
    return Layer(KIND_FORK, name, shape, shape, temporal=temporal,
                 bias=False)


def add_layer(name: str, shape: tuple[int, ...], skip: str,
              temporal: bool) -> Layer:
    """
    Describe a residual addition.

    :param name: the layer name
    :param shape: the shape
    :param skip: the layer whose output is added
    :param temporal: is it part of the temporal network?
    :return: the layer
    """
    return Layer(KIND_ADD, name, shape, shape, temporal=temporal,
                 bias=False, skip=skip)


def gap_layer(name: str, in_shape: tuple[int, int, int]) -> Layer:
    """
    Describe a global average pool.

    :param name: the layer name
    :param in_shape: the input shape `(C, H, W)`
    :return: the layer
    """
    return Layer(KIND_GAP, name, in_shape, (in_shape[0], ), bias=False)


def conv1d_layer(name: str, inputs: int, outputs: int, dilation: int,
                 causal: bool) -> Layer:
    """
    Describe a dilated temporal convolution with kernel size 3.

    :param name: the layer name
    :param inputs: the number of input channels
    :param outputs: the number of output channels
    :param dilation: the dilation
    :param causal: is the convolution causal?
    :return: the layer
    """
    return Layer(KIND_CONV1D, name, (inputs, ), (outputs, ), temporal=True,
                 kernel=nm.TEMPORAL_KERNEL, dilation=dilation,
                 causal=causal)


def conv1x1_layer(name: str, inputs: int, outputs: int) -> Layer:
    """
    Describe a pointwise temporal convolution.

    :param name: the layer name
    :param inputs: the number of input channels
    :param outputs: the number of output channels
    :return: the layer
    """
    return Layer(KIND_CONV1X1, name, (inputs, ), (outputs, ), temporal=True)


def softmax_layer(name: str, classes: int) -> Layer:
    """
    Describe the softmax over the classes of each time step.

    :param name: the layer name
    :param classes: the number of classes
    :return: the layer
    """
    return Layer(KIND_SOFTMAX, name, (classes, ), (classes, ), temporal=True,
                 bias=False)


@dataclass(frozen=True, init=False)
class LayerGraph:
    """An immutable, validated sequence of layers."""

    #: the layers
    layers: tuple[Layer, ...]

    def __init__(self, layers: Iterable[Layer]) -> None:
        """
        Create and validate the layer graph.

        :param layers: the layers
        """
        lst: Final[tuple[Layer, ...]] = tuple(layers)
        index: Final[dict[str, int]] = {}
        for i, layer in enumerate(lst):
            if not isinstance(layer, Layer):
                raise type_error(layer, f"layers[{i}]", Layer)
            if layer.name in index:
                raise ConfigError(f"Duplicate layer name {layer.name!r}.")
            if layer.source is not None:
                if layer.source not in index:
                    raise ConfigError(
                        f"Layer {layer.name!r} reads unknown or later "
                        f"layer {layer.source!r}.")
                expected = lst[index[layer.source]].out_shape
            else:
                expected = lst[i - 1].out_shape if i > 0 else \
                    layer.in_shape
            if expected != layer.in_shape:
                raise ConfigError(
                    f"Layer {layer.name!r} expects input {layer.in_shape} "
                    f"but receives {expected}.")
            if layer.skip is not None:
                if layer.skip not in index:
                    raise ConfigError(
                        f"Layer {layer.name!r} skips from unknown or later "
                        f"layer {layer.skip!r}.")
                if lst[index[layer.skip]].out_shape != layer.in_shape:
                    raise ConfigError(
                        f"Residual shapes differ at {layer.name!r}.")
            index[layer.name] = i
        object.__setattr__(self, "layers", lst)

    def __len__(self) -> int:
        """
        Get the number of layers.

        :return: the number of layers
        """
        return len(self.layers)

    def index_of(self, name: str) -> int:
        """
        Get the index of a layer.

        :param name: the layer name
        :return: the index
        """
        for i, layer in enumerate(self.layers):
            if layer.name == name:
                return i
        raise ConfigError(f"Unknown layer {name!r}.")

    def frame_part(self) -> "LayerGraph":
        """
        Get the leading frame layers, i.e., the spatial encoder.

        :return: the graph of all layers before the first temporal one
        """
        return LayerGraph(layer for layer in self.layers
                          if not layer.temporal)

    def temporal_part(self) -> "LayerGraph":
        """
        Get the temporal layers.

        :return: the graph of all temporal layers
        """
        return LayerGraph(layer for layer in self.layers if layer.temporal)

    def without(self, kinds: Iterable[str]) -> "LayerGraph":
        """
        Get a copy of this graph without the layers of some kinds.

        :param kinds: the kinds to drop
        :return: the new graph
        """
        drop: Final[set[str]] = set(kinds)
        return LayerGraph(layer for layer in self.layers
                          if layer.kind not in drop)

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        """
        Get the shapes of all parameters in layer order.

        :return: a mapping of parameter names to shapes
        """
        shapes: Final[dict[str, tuple[int, ...]]] = {}
        for layer in self.layers:
            shapes.update(layer.param_shapes())
        return shapes

    @staticmethod
    def concat(*graphs: "LayerGraph") -> "LayerGraph":
        """
        Concatenate several graphs.

        :param graphs: the graphs
        :return: the concatenated graph
        """
        return LayerGraph(chain.from_iterable(g.layers for g in graphs))


#: the parameter initialization with He-normal weights and zero biases
INIT_HE: Final[str] = "he"
#: all parameters zero
INIT_ZEROS: Final[str] = "zeros"
#: all parameters strictly positive, used for dependency probing
INIT_POSITIVE: Final[str] = "positive"


def init_params(graph: LayerGraph, rng: np.random.Generator,
                scheme: str = INIT_HE,
                dtype: type = np.float32) -> ParamStore:
    """
    Create the parameters of a graph.

    :param graph: the graph
    :param rng: the random number generator
    :param scheme: the initialization scheme
    :param dtype: the floating point type
    :return: the parameter store

    >>> g = LayerGraph([conv1x1_layer("a", 3, 2)])
    >>> ps = init_params(g, np.random.default_rng(1))
    >>> ps.names(), ps.size()
    (('a.w', 'a.b'), 8)
    """
    if scheme not in {INIT_HE, INIT_ZEROS, INIT_POSITIVE}:
        raise ConfigError(f"Unknown initialization scheme {scheme!r}.")
    ps: Final[ParamStore] = ParamStore()
    for name, shape in graph.param_shapes().items():
        if scheme == INIT_ZEROS:
            value = np.zeros(shape, dtype=dtype)
        elif scheme == INIT_POSITIVE:
            value = rng.uniform(0.01, 0.1, size=shape).astype(dtype)
        elif name.endswith(".gamma"):
            value = np.ones(shape, dtype=dtype)
        elif name.endswith((".b", ".beta")):
            value = np.zeros(shape, dtype=dtype)
        else:
            fan_in = int(np.prod(shape[1:]))
            value = (rng.standard_normal(shape) * np.sqrt(
                2.0 / fan_in)).astype(dtype)
        ps.add(name, value)
    return ps


def __bias(params: ParamStore, layer: Layer) -> np.ndarray | None:
    """
    Get the bias of a layer, if any.

    :param params: the parameters
    :param layer: the layer
    :return: the bias or `None`
    """
    return params.value(f"{layer.name}.b") if layer.bias else None


def forward(graph: LayerGraph, params: ParamStore,
            x: np.ndarray) -> list[np.ndarray]:
    """
    Evaluate a graph on a batch.

    Frame graphs take inputs of shape `[B, C, H, W]`, temporal graphs take
    inputs of shape `[B, C, T]`.

    :param graph: the graph
    :param params: the parameters
    :param x: the batched input
    :return: the outputs of all layers, the last one is the graph output
    """
    outs: Final[list[np.ndarray]] = []
    names: Final[dict[str, int]] = {}
    for i, layer in enumerate(graph.layers):
        inp = outs[names[layer.source]] if layer.source is not None else (
            outs[i - 1] if i > 0 else x)
        kind = layer.kind
        if kind == KIND_CONV2D:
            out = nm.conv2d(inp, params.value(f"{layer.name}.w"),
                            __bias(params, layer), layer.stride)
        elif kind == KIND_CONV1D:
            out = nm.conv1d_dilated(
                inp, params.value(f"{layer.name}.w"), __bias(params, layer),
                layer.dilation, layer.causal)
        elif kind == KIND_CONV1X1:
            out = nm.conv1x1(inp, params.value(f"{layer.name}.w"),
                             __bias(params, layer))
        elif kind == KIND_RELU:
            out = nm.relu(inp)
        elif kind == KIND_FORK:
            out = inp
        elif kind == KIND_ADD:
            out = inp + outs[names[layer.skip]]
        elif kind == KIND_GAP:
            out = nm.global_avg_pool(inp)
        elif kind == KIND_SOFTMAX:
            out = nm.softmax(inp, axis=1)
        else:
            raise ConfigError(
                f"Layer kind {kind!r} of {layer.name!r} is only counted, "
                "never executed.")
        outs.append(out)
        names[layer.name] = i
    return outs


def backward(graph: LayerGraph, params: ParamStore, x: np.ndarray,
             outs: list[np.ndarray], dy: np.ndarray) -> np.ndarray:
    """
    Back-propagate a gradient through a graph.

    The parameter gradients are *added* to the `grad` fields of the
    parameters.

    :param graph: the graph
    :param params: the parameters
    :param x: the input fed to :func:`forward`
    :param outs: the layer outputs returned by :func:`forward`
    :param dy: the gradient with respect to the graph output
    :return: the gradient with respect to the input `x`
    """
    layers: Final[tuple[Layer, ...]] = graph.layers
    index: Final[dict[str, int]] = {
        layer.name: i for i, layer in enumerate(layers)}
    grads: Final[dict[int, np.ndarray]] = {len(layers) - 1: dy}

    def __put(idx: int, g: np.ndarray) -> None:
        """Accumulate the gradient of the output of layer `idx`."""
        if idx in grads:
            grads[idx] = grads[idx] + g
        else:
            grads[idx] = g

    for i in range(len(layers) - 1, -1, -1):
        g = grads.pop(i, None)
        if g is None:
            continue
        layer = layers[i]
        src = index[layer.source] if layer.source is not None else i - 1
        inp = outs[src] if src >= 0 else x
        kind = layer.kind
        if kind == KIND_CONV2D:
            w = params[f"{layer.name}.w"]
            dx, dw, db = nm.conv2d_backward(inp, w.value, g, layer.stride)
        elif kind == KIND_CONV1D:
            w = params[f"{layer.name}.w"]
            dx, dw, db = nm.conv1d_dilated_backward(
                inp, w.value, g, layer.dilation, layer.causal)
        elif kind == KIND_CONV1X1:
            w = params[f"{layer.name}.w"]
            dx, dw, db = nm.conv1x1_backward(inp, w.value, g)
        else:
            if kind == KIND_RELU:
                dx = nm.relu_backward(inp, g)
            elif kind == KIND_FORK:
                dx = g
            elif kind == KIND_ADD:
                dx = g
                __put(index[layer.skip], g)
            elif kind == KIND_GAP:
                dx = nm.global_avg_pool_backward(inp, g)
            elif kind == KIND_SOFTMAX:
                dx = nm.softmax_backward(outs[i], g, axis=1)
            else:
                raise ConfigError(
                    f"Layer kind {kind!r} of {layer.name!r} cannot be "
                    "differentiated.")
            __put(src, dx)
            continue
        w.grad += dw
        if layer.bias:
            params[f"{layer.name}.b"].grad += db
        __put(src, dx)
    result = grads.pop(-1, None)
    return np.zeros_like(x) if result is None else result
