"""The fixed task-oriented convolutional network run on injected weights.

The canonical topology has 20 convolution layers with 3x3 kernels: layer 3
downsamples with stride 2, layers 4-17 form seven two-convolution residual
blocks (skip added to the second conv's pre-normalization output), layer 18
is the 4x4 stride-2 transposed convolution that restores resolution, and
every layer except the last is followed by parameter-free instance
normalization and ReLU.  The network owns no weights: kernels and biases
arrive per call as `InjectedWeights`.

forward/backward are reentrant; a cache belongs to one forward->backward
pair.  Weights are read-only here, so concurrent inference may share them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import (
    ConvSpec,
    ShapeError,
    Tensor,
    conv2d_backward,
    conv2d_forward_cols,
    conv_transpose2d_backward,
    conv_transpose2d_forward_cols,
    instance_norm_backward,
    instance_norm_forward,
    relu_backward,
    relu_forward,
)

INSTANCE_NORM_EPS = 1e-5
DEFAULT_CHANNELS = 24
# dilation per residual block (seven blocks); the middle two are dilated
DEFAULT_BLOCK_DILATIONS = (1, 1, 1, 2, 4, 1, 1)


@dataclass(frozen=True)
class LayerSpec:
    conv: ConvSpec
    norm: bool = True
    relu: bool = True
    # index (0-based) of the layer whose *input* is added to this layer's
    # conv output before normalization; None for non-residual layers
    residual_source: int | None = None


@dataclass(frozen=True)
class BaseNetConfig:
    layers: tuple[LayerSpec, ...]
    channels: int = DEFAULT_CHANNELS

    @classmethod
    def standard(
        cls,
        channels: int = DEFAULT_CHANNELS,
        block_dilations: tuple[int, ...] = DEFAULT_BLOCK_DILATIONS,
        in_channels: int = 4,
        out_channels: int = 3,
    ) -> "BaseNetConfig":
        """The canonical 20-layer configuration."""
        if len(block_dilations) != 7:
            raise ShapeError("need one dilation per residual block (7 blocks)")
        c = channels
        layers: list[LayerSpec] = []
        layers.append(LayerSpec(ConvSpec(in_channels, c, (3, 3), padding=1)))
        layers.append(LayerSpec(ConvSpec(c, c, (3, 3), padding=1)))
        layers.append(LayerSpec(ConvSpec(c, c, (3, 3), stride=2, padding=1)))
        for b, d in enumerate(block_dilations):
            first = 3 + 2 * b
            layers.append(LayerSpec(ConvSpec(c, c, (3, 3), dilation=d, padding=d)))
            layers.append(
                LayerSpec(
                    ConvSpec(c, c, (3, 3), dilation=d, padding=d),
                    residual_source=first,
                )
            )
        layers.append(
            LayerSpec(ConvSpec(c, c, (4, 4), stride=2, padding=1, transposed=True))
        )
        layers.append(LayerSpec(ConvSpec(c, c, (3, 3), padding=1)))
        layers.append(LayerSpec(ConvSpec(c, out_channels, (3, 3), padding=1), norm=False, relu=False))
        cfg = cls(layers=tuple(layers), channels=c)
        cfg.validate_standard()
        return cfg

    def validate_standard(self):
        ls = self.layers
        if len(ls) != 20:
            raise ShapeError(f"standard config needs exactly 20 layers, got {len(ls)}")
        if ls[2].conv.stride != 2 or ls[2].conv.transposed:
            raise ShapeError("layer 3 must be the stride-2 downsampling convolution")
        if not ls[17].conv.transposed or ls[17].conv.kernel != (4, 4) or ls[17].conv.stride != 2:
            raise ShapeError("layer 18 must be the 4x4 stride-2 transposed convolution")
        for b in range(7):
            first = 3 + 2 * b
            if ls[first].residual_source is not None or ls[first + 1].residual_source != first:
                raise ShapeError(f"layers {first + 1}/{first + 2} must form residual block {b}")
        if ls[0].conv.in_channels != 4:
            raise ShapeError("layer 1 must take 4 input channels (RGB + edge map)")
        if ls[-1].conv.out_channels != 3:
            raise ShapeError("layer 20 must emit 3 channels")
        if ls[-1].norm or ls[-1].relu:
            raise ShapeError("the final layer carries no normalization or activation")
        for i, l in enumerate(ls[:-1]):
            if not (l.norm and l.relu):
                raise ShapeError(f"layer {i + 1} must be followed by instance norm + ReLU")


@dataclass
class InjectedWeights:
    """Per-layer kernels and biases supplied by the weight generator."""

    kernels: list[Tensor]
    biases: list[np.ndarray]

    def validate(self, config: BaseNetConfig):
        if len(self.kernels) != len(config.layers) or len(self.biases) != len(config.layers):
            raise ShapeError(
                f"{len(self.kernels)} kernels for {len(config.layers)} layers"
            )
        for i, (layer, k, b) in enumerate(zip(config.layers, self.kernels, self.biases)):
            if k.shape != layer.conv.weight_shape():
                raise ShapeError(
                    f"layer {i + 1} kernel: got {k.shape}, expected {layer.conv.weight_shape()}"
                )
            if b.shape != (layer.conv.out_channels,):
                raise ShapeError(
                    f"layer {i + 1} bias: got {b.shape}, expected ({layer.conv.out_channels},)"
                )


def layer_weight_dim(spec: ConvSpec) -> int:
    co, ci, kh, kw = spec.weight_shape()
    return co * ci * kh * kw + co


def total_weight_dims(config: BaseNetConfig) -> list[int]:
    """Flat size (kernel + bias) of each layer's injected weights."""
    return [layer_weight_dim(layer.conv) for layer in config.layers]


@dataclass
class _LayerCache:
    x_in: Tensor
    conv_out: Tensor | None = None  # pre-norm value (after any residual add)
    norm_cache: tuple | None = None
    pre_relu: Tensor | None = None
    cols: np.ndarray | None = None  # im2col matrix, reused by backward


@dataclass
class ForwardCache:
    layers: list[_LayerCache] = field(default_factory=list)
    output: Tensor | None = None


def check_input_size(h: int, w: int):
    if h % 4 or w % 4:
        raise ShapeError(
            f"input spatial size must be divisible by 4, got {h}x{w} "
            "(reflect-pad at the call site, e.g. pad_to_multiple)"
        )


def forward(x: Tensor, weights: InjectedWeights, config: BaseNetConfig, want_cache: bool = True):
    """Run the network; returns (output, cache).  Output matches the input's
    spatial size."""
    weights.validate(config)
    n, c, h, w = x.shape
    if c != config.layers[0].conv.in_channels:
        raise ShapeError(
            f"input channels: got {c}, config expects {config.layers[0].conv.in_channels}"
        )
    check_input_size(h, w)

    cache = ForwardCache() if want_cache else None
    cur = x
    layer_inputs: list[Tensor] = []
    for i, layer in enumerate(config.layers):
        layer_inputs.append(cur)
        lc = _LayerCache(x_in=cur)
        if layer.conv.transposed:
            y, cols = conv_transpose2d_forward_cols(
                cur, weights.kernels[i], weights.biases[i], layer.conv
            )
        else:
            y, cols = conv2d_forward_cols(cur, weights.kernels[i], weights.biases[i], layer.conv)
        lc.cols = cols if cache is not None else None
        if layer.residual_source is not None:
            y = Tensor(y.data + layer_inputs[layer.residual_source].data)
        lc.conv_out = y
        if layer.norm:
            y, nc = instance_norm_forward(y, INSTANCE_NORM_EPS)
            lc.norm_cache = nc
        if layer.relu:
            lc.pre_relu = y
            y = relu_forward(y)
        if cache is not None:
            cache.layers.append(lc)
        cur = y
    if cache is not None:
        cache.output = cur
    return cur, cache


def backward(cache: ForwardCache, weights: InjectedWeights, config: BaseNetConfig, grad_out: Tensor):
    """Backpropagate through a cached forward pass.

    Returns (grad_kernels, grad_biases, grad_input) where the first two are
    per-layer lists aligned with the config.
    """
    if grad_out.shape != cache.output.shape:
        raise ShapeError(
            f"grad_out shape {grad_out.shape} != forward output shape {cache.output.shape}"
        )
    n_layers = len(config.layers)
    grad_kernels: list[Tensor | None] = [None] * n_layers
    grad_biases: list[np.ndarray | None] = [None] * n_layers
    # gradients waiting to be added to the *input* of a given layer index
    pending_skip: dict[int, np.ndarray] = {}

    g = grad_out
    for i in range(n_layers - 1, -1, -1):
        layer = config.layers[i]
        lc = cache.layers[i]
        if layer.relu:
            g = relu_backward(lc.pre_relu, g)
        if layer.norm:
            g = instance_norm_backward(lc.norm_cache, g)
        if layer.residual_source is not None:
            prev = pending_skip.get(layer.residual_source)
            pending_skip[layer.residual_source] = (
                g.data.copy() if prev is None else prev + g.data
            )
        if layer.conv.transposed:
            gx, gw, gb = conv_transpose2d_backward(
                lc.x_in, weights.kernels[i], layer.conv, g, cols=lc.cols
            )
        else:
            gx, gw, gb = conv2d_backward(lc.x_in, weights.kernels[i], layer.conv, g, cols=lc.cols)
        grad_kernels[i] = gw
        grad_biases[i] = gb
        if i in pending_skip:
            gx = Tensor(gx.data + pending_skip.pop(i))
        g = gx
    return grad_kernels, grad_biases, g


def pad_to_multiple(img: np.ndarray, multiple: int = 4):
    """Reflect-pad (c,h,w) so both spatial dims divide `multiple`.

    Returns (padded, (h, w)) with the original size for later cropping.
    """
    c, h, w = img.shape
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph == 0 and pw == 0:
        return img, (h, w)
    if h == 1 or w == 1:
        padded = np.pad(img, ((0, 0), (0, ph), (0, pw)), mode="edge")
    else:
        padded = np.pad(img, ((0, 0), (0, ph), (0, pw)), mode="reflect")
    return padded, (h, w)


def crop_to(img: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    h, w = size
    return img[:, :h, :w]
