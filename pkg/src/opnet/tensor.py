"""Minimal dense NCHW tensor engine with explicit forward/backward pairs.

Covers exactly the layer set the conditioned base network needs: 2-d
convolution (plain and transposed), parameter-free instance normalization,
ReLU, elementwise add, mean-squared-error loss and the per-layer fully
connected map of the weight generator.  Convolutions use im2col plus a BLAS
matmul; every backward pass is derived by hand and checked against central
finite differences in the test suite.

All operations are pure: inputs are never mutated and no global state is
touched, so concurrent calls on disjoint data are safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import as_strided

_DTYPES = {"single": np.float32, "double": np.float64}


class ShapeError(ValueError):
    """Raised when tensor shapes do not satisfy an operation's contract."""


def _dtype_of(precision: str) -> np.dtype:
    try:
        return np.dtype(_DTYPES[precision])
    except KeyError:
        raise ValueError(f"unknown precision {precision!r}, expected 'single' or 'double'")


class Tensor:
    """Dense 4-d array in (batch, channel, height, width) order.

    `data` is row-major and owned by the tensor; callers must treat a
    constructed tensor as immutable.  `grad`, when present, has the same
    shape and dtype as `data`.
    """

    __slots__ = ("data", "grad")

    def __init__(self, data: np.ndarray, grad: np.ndarray | None = None):
        data = np.asarray(data)
        if data.ndim != 4:
            raise ShapeError(f"tensor data must be 4-d (n,c,h,w), got ndim={data.ndim}")
        if data.dtype not in (np.float32, np.float64):
            data = data.astype(np.float64)
        self.data = data
        self.grad = grad

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    @property
    def precision(self) -> str:
        return "single" if self.data.dtype == np.float32 else "double"

    @classmethod
    def zeros(cls, shape, precision: str = "single") -> "Tensor":
        return cls(np.zeros(shape, dtype=_dtype_of(precision)))

    @classmethod
    def from_array(cls, arr, precision: str | None = None) -> "Tensor":
        arr = np.asarray(arr)
        if precision is not None:
            arr = arr.astype(_dtype_of(precision))
        return cls(arr)

    def astype(self, precision: str) -> "Tensor":
        return Tensor(self.data.astype(_dtype_of(precision)))

    def __repr__(self):
        return f"Tensor(shape={self.shape}, precision={self.precision})"


@dataclass(frozen=True)
class ConvSpec:
    """Static description of one convolution layer.

    For transposed=False the output spatial size is
    floor((H + 2*padding - dilation*(kh-1) - 1) / stride) + 1.  For
    transposed=True the layer is the stride-s upsampling deconvolution with
    output size (H-1)*stride - 2*padding + kh; the canonical 4x4/stride-2/
    padding-1 configuration doubles the spatial size exactly.
    """

    in_channels: int
    out_channels: int
    kernel: tuple[int, int] = (3, 3)
    stride: int = 1
    dilation: int = 1
    padding: int = 1
    transposed: bool = False

    def __post_init__(self):
        if self.in_channels <= 0 or self.out_channels <= 0:
            raise ShapeError("channel counts must be positive")
        if self.kernel[0] <= 0 or self.kernel[1] <= 0:
            raise ShapeError("kernel dims must be positive")
        if self.stride <= 0 or self.dilation <= 0 or self.padding < 0:
            raise ShapeError("stride/dilation must be positive, padding non-negative")

    def out_size(self, h: int, w: int) -> tuple[int, int]:
        kh, kw = self.kernel
        if self.transposed:
            oh = (h - 1) * self.stride - 2 * self.padding + kh
            ow = (w - 1) * self.stride - 2 * self.padding + kw
        else:
            oh = (h + 2 * self.padding - self.dilation * (kh - 1) - 1) // self.stride + 1
            ow = (w + 2 * self.padding - self.dilation * (kw - 1) - 1) // self.stride + 1
        if oh <= 0 or ow <= 0:
            raise ShapeError(f"non-positive output size {oh}x{ow} for input {h}x{w} with {self}")
        return oh, ow

    def weight_shape(self) -> tuple[int, int, int, int]:
        return (self.out_channels, self.in_channels) + tuple(self.kernel)


def _check_conv_args(x: Tensor, w: Tensor, b: np.ndarray, spec: ConvSpec):
    if x.shape[1] != spec.in_channels:
        raise ShapeError(
            f"input channels: got {x.shape[1]}, spec expects in_channels={spec.in_channels}"
        )
    if w.shape != spec.weight_shape():
        raise ShapeError(f"weight shape: got {w.shape}, spec expects {spec.weight_shape()}")
    if b.shape != (spec.out_channels,):
        raise ShapeError(f"bias shape: got {b.shape}, spec expects ({spec.out_channels},)")
    if x.data.dtype != w.data.dtype:
        raise ShapeError(
            f"precision mismatch: input is {x.precision}, weights are {w.precision}"
        )


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, dilation: int, padding: int):
    """Unfold NCHW into (N, C*kh*kw, oh*ow) patch columns (zero padding)."""
    n, c, h, w = x.shape
    if padding > 0:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh = (h + 2 * padding - dilation * (kh - 1) - 1) // stride + 1
    ow = (w + 2 * padding - dilation * (kw - 1) - 1) // stride + 1
    sn, sc, sh, sw = x.strides
    windows = as_strided(
        x,
        shape=(n, c, kh, kw, oh, ow),
        strides=(sn, sc, sh * dilation, sw * dilation, sh * stride, sw * stride),
    )
    cols = np.ascontiguousarray(windows).reshape(n, c * kh * kw, oh * ow)
    return cols, oh, ow


def _col2im(cols: np.ndarray, x_shape, kh, kw, stride, dilation, padding, oh, ow):
    """Scatter-add patch columns back onto the (padded) input grid."""
    n, c, h, w = x_shape
    hp, wp = h + 2 * padding, w + 2 * padding
    out = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    cols = cols.reshape(n, c, kh, kw, oh, ow)
    for a in range(kh):
        ia = a * dilation
        for bb in range(kw):
            jb = bb * dilation
            out[:, :, ia : ia + oh * stride : stride, jb : jb + ow * stride : stride] += cols[
                :, :, a, bb
            ]
    if padding > 0:
        out = out[:, :, padding:-padding, padding:-padding]
    return out


def conv2d_forward_cols(x: Tensor, w: Tensor, b: np.ndarray, spec: ConvSpec):
    """conv2d_forward that also returns the im2col matrix for backward reuse."""
    if spec.transposed:
        raise ShapeError("conv2d_forward requires spec.transposed=False")
    b = np.asarray(b, dtype=x.data.dtype)
    _check_conv_args(x, w, b, spec)
    kh, kw = spec.kernel
    cols, oh, ow = _im2col(x.data, kh, kw, spec.stride, spec.dilation, spec.padding)
    w2d = w.data.reshape(spec.out_channels, -1)
    y = np.matmul(w2d[None], cols)  # (n, out, oh*ow)
    y += b[None, :, None]
    n = x.shape[0]
    return Tensor(y.reshape(n, spec.out_channels, oh, ow)), cols


def conv2d_forward(x: Tensor, w: Tensor, b: np.ndarray, spec: ConvSpec) -> Tensor:
    """Cross-correlation with zero padding; linear in both x and w."""
    y, _ = conv2d_forward_cols(x, w, b, spec)
    return y


def conv2d_backward(x: Tensor, w: Tensor, spec: ConvSpec, grad_out: Tensor, cols=None):
    """Gradients of conv2d_forward w.r.t. input, weights and bias.

    `cols` may carry the forward pass's im2col matrix to avoid recomputing
    it; it must come from the same (x, spec) pair.
    """
    if spec.transposed:
        raise ShapeError("conv2d_backward requires spec.transposed=False")
    kh, kw = spec.kernel
    n, _, h, ww = x.shape
    oh, ow = spec.out_size(h, ww)
    if grad_out.shape != (n, spec.out_channels, oh, ow):
        raise ShapeError(
            f"grad_out shape: got {grad_out.shape}, forward output is "
            f"({n}, {spec.out_channels}, {oh}, {ow})"
        )
    if cols is None:
        cols, _, _ = _im2col(x.data, kh, kw, spec.stride, spec.dilation, spec.padding)
    go = grad_out.data.reshape(n, spec.out_channels, oh * ow)
    grad_b = go.sum(axis=(0, 2))
    grad_w = np.matmul(go, cols.transpose(0, 2, 1)).sum(axis=0)
    w2d = w.data.reshape(spec.out_channels, -1)
    gcols = np.matmul(w2d.T[None], go)
    grad_x = _col2im(
        gcols, x.shape, kh, kw, spec.stride, spec.dilation, spec.padding, oh, ow
    )
    return Tensor(grad_x), Tensor(grad_w.reshape(w.shape)), grad_b


def _upsample_insert(x: np.ndarray, stride: int) -> np.ndarray:
    n, c, h, w = x.shape
    up = np.zeros((n, c, (h - 1) * stride + 1, (w - 1) * stride + 1), dtype=x.dtype)
    up[:, :, ::stride, ::stride] = x
    return up


def _equivalent_conv_spec(spec: ConvSpec) -> ConvSpec:
    # Transposed conv == zero-inserted input, pad k-1-p, stride-1 conv with
    # the spatially flipped kernel.
    kh, kw = spec.kernel
    return ConvSpec(
        in_channels=spec.in_channels,
        out_channels=spec.out_channels,
        kernel=(kh, kw),
        stride=1,
        dilation=1,
        padding=kh - 1 - spec.padding,
        transposed=False,
    )


def conv_transpose2d_forward_cols(x: Tensor, w: Tensor, b: np.ndarray, spec: ConvSpec):
    """Transposed conv that also returns the equivalent-conv im2col matrix."""
    if not spec.transposed:
        raise ShapeError("conv_transpose2d_forward requires spec.transposed=True")
    b = np.asarray(b, dtype=x.data.dtype)
    _check_conv_args(x, w, b, spec)
    if spec.kernel[0] - 1 - spec.padding < 0:
        raise ShapeError("transposed conv needs padding <= kernel-1")
    up = _upsample_insert(x.data, spec.stride)
    w_flip = w.data[:, :, ::-1, ::-1]
    eq = _equivalent_conv_spec(spec)
    y, cols = conv2d_forward_cols(Tensor(up), Tensor(np.ascontiguousarray(w_flip)), b, eq)
    return y, cols


def conv_transpose2d_forward(x: Tensor, w: Tensor, b: np.ndarray, spec: ConvSpec) -> Tensor:
    """Stride-s upsampling convolution: y[n,o,s*i-p+a,s*j-p+b] += x[n,c,i,j]*w[o,c,a,b]."""
    y, _ = conv_transpose2d_forward_cols(x, w, b, spec)
    return y


def conv_transpose2d_backward(x: Tensor, w: Tensor, spec: ConvSpec, grad_out: Tensor, cols=None):
    if not spec.transposed:
        raise ShapeError("conv_transpose2d_backward requires spec.transposed=True")
    n, _, h, ww = x.shape
    oh, ow = spec.out_size(h, ww)
    if grad_out.shape != (n, spec.out_channels, oh, ow):
        raise ShapeError(
            f"grad_out shape: got {grad_out.shape}, forward output is "
            f"({n}, {spec.out_channels}, {oh}, {ow})"
        )
    up = Tensor(_upsample_insert(x.data, spec.stride))
    w_flip = Tensor(np.ascontiguousarray(w.data[:, :, ::-1, ::-1]))
    eq = _equivalent_conv_spec(spec)
    g_up, g_wflip, grad_b = conv2d_backward(up, w_flip, eq, grad_out, cols=cols)
    grad_x = g_up.data[:, :, :: spec.stride, :: spec.stride]
    grad_w = g_wflip.data[:, :, ::-1, ::-1]
    return Tensor(np.ascontiguousarray(grad_x)), Tensor(np.ascontiguousarray(grad_w)), grad_b


def instance_norm_forward(x: Tensor, eps: float = 1e-5):
    """Standardize each (sample, channel) plane over its spatial extent.

    No learned affine parameters: all trainable base-net state must come
    from the weight generator.  Returns (y, cache) where cache feeds
    instance_norm_backward.
    """
    n, c, h, w = x.shape
    if h * w < 2:
        raise ShapeError("instance norm needs at least 2 spatial elements per channel")
    mu = x.data.mean(axis=(2, 3), keepdims=True)
    var = x.data.var(axis=(2, 3), keepdims=True)
    inv_std = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.data.dtype))
    y = (x.data - mu) * inv_std
    return Tensor(y), (y, inv_std)


def instance_norm_backward(cache, grad_out: Tensor) -> Tensor:
    y, inv_std = cache
    g = grad_out.data
    if g.shape != y.shape:
        raise ShapeError(f"grad_out shape {g.shape} != forward output shape {y.shape}")
    g_mean = g.mean(axis=(2, 3), keepdims=True)
    gy_mean = (g * y).mean(axis=(2, 3), keepdims=True)
    gx = inv_std * (g - g_mean - y * gy_mean)
    return Tensor(gx)


def relu_forward(x: Tensor) -> Tensor:
    return Tensor(np.maximum(x.data, 0))


def relu_backward(x: Tensor, grad_out: Tensor) -> Tensor:
    if grad_out.shape != x.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} != input shape {x.shape}")
    return Tensor(grad_out.data * (x.data > 0))


def add(x: Tensor, y: Tensor) -> Tensor:
    if x.shape != y.shape:
        raise ShapeError(f"add shape mismatch: {x.shape} vs {y.shape}")
    if x.data.dtype != y.data.dtype:
        raise ShapeError(f"add precision mismatch: {x.precision} vs {y.precision}")
    return Tensor(x.data + y.data)


def mse_loss(pred: Tensor, target: Tensor):
    """Mean of squared differences over all elements; returns (loss, grad_pred)."""
    if pred.shape != target.shape:
        raise ShapeError(f"mse shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    loss = float(np.mean(diff * diff))
    grad = diff * (2.0 / diff.size)
    return loss, Tensor(grad)


def fc_forward(gamma: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Affine map a @ gamma + b producing one layer's flattened weights."""
    gamma = np.asarray(gamma)
    if a.ndim != 2 or gamma.ndim != 1 or a.shape[1] != gamma.shape[0]:
        raise ShapeError(f"fc dims: A is {a.shape}, gamma is {gamma.shape}")
    if b.shape != (a.shape[0],):
        raise ShapeError(f"fc bias: B is {b.shape}, expected ({a.shape[0]},)")
    return a @ gamma + b


def fc_backward(gamma: np.ndarray, grad_out: np.ndarray):
    """grad_A is the outer product grad_out * gamma^T; grad_B is grad_out."""
    gamma = np.asarray(gamma)
    return np.outer(grad_out, gamma), np.array(grad_out, copy=True)
