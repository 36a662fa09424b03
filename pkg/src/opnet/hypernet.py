"""Weight generator: one affine (fc) map per base-network convolution layer.

Layer i's flattened kernel-plus-bias vector is A_i @ gamma + B_i, so the
generated weights are exactly affine in the conditioning vector.  Biases of
the base network are generated together with the kernels: every learnable
degree of freedom of the base network lives here.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .basenet import BaseNetConfig, InjectedWeights, total_weight_dims
from .tensor import (
    ConvSpec,
    ShapeError,
    Tensor,
    conv2d_forward,
    conv_transpose2d_forward,
    fc_backward,
    fc_forward,
)


@dataclass
class HyperParams:
    """Per-layer fc weights: a[i] is (n_wi, m), b[i] is (n_wi,)."""

    a: list[np.ndarray]
    b: list[np.ndarray]

    @property
    def m(self) -> int:
        return self.a[0].shape[1]

    @property
    def precision(self) -> str:
        return "single" if self.a[0].dtype == np.float32 else "double"

    def validate(self, config: BaseNetConfig):
        dims = total_weight_dims(config)
        if len(self.a) != len(dims):
            raise ShapeError(f"{len(self.a)} fc layers for {len(dims)} conv layers")
        for i, n_wi in enumerate(dims):
            if self.a[i].shape != (n_wi, self.m) or self.b[i].shape != (n_wi,):
                raise ShapeError(
                    f"fc layer {i + 1}: A is {self.a[i].shape}, B is {self.b[i].shape}, "
                    f"expected ({n_wi}, {self.m}) and ({n_wi},)"
                )

    def astype(self, precision: str) -> "HyperParams":
        dt = np.float32 if precision == "single" else np.float64
        return HyperParams([a.astype(dt) for a in self.a], [b.astype(dt) for b in self.b])

    def copy(self) -> "HyperParams":
        return HyperParams([a.copy() for a in self.a], [b.copy() for b in self.b])


def init_hyperparams(
    config: BaseNetConfig,
    m: int,
    seed: int,
    precision: str = "single",
    a_scale: float = 0.1,
) -> HyperParams:
    """Fan-in-scaled uniform init.

    B_i ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)) so that at gamma=0 the base
    network looks like a conventionally initialized conv net; A_i gets
    a_scale times the same bound for mild parameter sensitivity at start.
    """
    rng = np.random.default_rng(seed)
    dt = np.float32 if precision == "single" else np.float64
    a_list, b_list = [], []
    for layer in config.layers:
        co, ci, kh, kw = layer.conv.weight_shape()
        n_wi = co * ci * kh * kw + co
        bound = 1.0 / np.sqrt(ci * kh * kw)
        b_list.append(rng.uniform(-bound, bound, size=n_wi).astype(dt))
        a_list.append(rng.uniform(-a_scale * bound, a_scale * bound, size=(n_wi, m)).astype(dt))
    return HyperParams(a_list, b_list)


def _split_flat(flat: np.ndarray, spec: ConvSpec):
    co, ci, kh, kw = spec.weight_shape()
    ksize = co * ci * kh * kw
    kernel = Tensor(flat[:ksize].reshape(co, ci, kh, kw))
    bias = flat[ksize:]
    return kernel, bias


def generate_weights(hp: HyperParams, gamma: np.ndarray, config: BaseNetConfig) -> InjectedWeights:
    """Evaluate every fc layer at gamma and reshape into kernels/biases."""
    gamma = np.asarray(gamma, dtype=hp.a[0].dtype)
    if gamma.shape != (hp.m,):
        raise ShapeError(f"gamma has shape {gamma.shape}, hyperparams expect ({hp.m},)")
    hp.validate(config)
    kernels, biases = [], []
    for layer, a, b in zip(config.layers, hp.a, hp.b):
        flat = fc_forward(gamma, a, b)
        kernel, bias = _split_flat(flat, layer.conv)
        kernels.append(kernel)
        biases.append(bias)
    return InjectedWeights(kernels, biases)


def flatten_weight_grads(grad_kernels, grad_biases) -> list[np.ndarray]:
    return [
        np.concatenate([gk.data.ravel(), gb])
        for gk, gb in zip(grad_kernels, grad_biases)
    ]


def hyper_backward(gamma: np.ndarray, grad_flats: list[np.ndarray]):
    """Chain rule through the affine maps: grad_A_i = grad_W_i outer gamma,
    grad_B_i = grad_W_i."""
    gamma = np.asarray(gamma)
    grads_a, grads_b = [], []
    for gf in grad_flats:
        ga, gb = fc_backward(gamma, gf)
        grads_a.append(ga)
        grads_b.append(gb)
    return grads_a, grads_b


def _conv_by_layer(x: Tensor, kernel: Tensor, bias: np.ndarray, spec: ConvSpec) -> Tensor:
    if spec.transposed:
        return conv_transpose2d_forward(x, kernel, bias, spec)
    return conv2d_forward(x, kernel, bias, spec)


def multipath_equivalent(
    hp: HyperParams, gamma: np.ndarray, layer_index: int, x: Tensor, config: BaseNetConfig
) -> Tensor:
    """Evaluate one generated conv layer as its multi-path decomposition.

    (A_i gamma + B_i) (x) x  ==  sum_k gamma_k * (A_ik (x) x) + B_i (x) x,
    where A_ik is column k of A_i reshaped into a basis kernel (with its
    slice of the generated bias riding along each path).
    """
    gamma = np.asarray(gamma, dtype=hp.a[0].dtype)
    spec = config.layers[layer_index].conv
    a, b = hp.a[layer_index], hp.b[layer_index]
    k_b, b_b = _split_flat(b.copy(), spec)
    out = _conv_by_layer(x, k_b, b_b, spec).data
    for k in range(hp.m):
        k_a, b_a = _split_flat(a[:, k].copy(), spec)
        path = _conv_by_layer(x, k_a, b_a, spec).data
        out = out + gamma[k] * path
    return Tensor(out)


def affine_structure_check(
    hp: HyperParams, gamma_a: np.ndarray, gamma_b: np.ndarray, t: float, config: BaseNetConfig
) -> float:
    """Max |W(t*ga + (1-t)*gb) - (t*W(ga) + (1-t)*W(gb))| over all layers."""
    ga = np.asarray(gamma_a, dtype=hp.a[0].dtype)
    gb = np.asarray(gamma_b, dtype=hp.a[0].dtype)
    mixed = generate_weights(hp, t * ga + (1 - t) * gb, config)
    wa = generate_weights(hp, ga, config)
    wb = generate_weights(hp, gb, config)
    dev = 0.0
    for i in range(len(config.layers)):
        dk = mixed.kernels[i].data - (t * wa.kernels[i].data + (1 - t) * wb.kernels[i].data)
        db = mixed.biases[i] - (t * wa.biases[i] + (1 - t) * wb.biases[i])
        dev = max(dev, float(np.abs(dk).max()), float(np.abs(db).max()))
    return dev


def export_weight_trajectory(
    hp: HyperParams, gamma_grid, layer_index: int, config: BaseNetConfig
) -> np.ndarray:
    """Stack layer `layer_index`'s flat weight vectors, one row per gamma."""
    rows = []
    for gamma in gamma_grid:
        gamma = np.asarray(gamma, dtype=hp.a[0].dtype)
        flat = fc_forward(gamma, hp.a[layer_index], hp.b[layer_index])
        rows.append(np.asarray(flat, dtype=np.float64))
    return np.stack(rows, axis=0)


def write_trajectory_csv(path, gamma_grid, matrix: np.ndarray):
    """CSV with the gamma columns first, then the flat weight values."""
    m = len(np.atleast_1d(gamma_grid[0]))
    header = [f"gamma_{k}" for k in range(m)] + [f"w_{j}" for j in range(matrix.shape[1])]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for gamma, row in zip(gamma_grid, matrix):
            writer.writerow(list(np.atleast_1d(gamma).astype(float)) + row.tolist())


def pca_project(matrix: np.ndarray, dims: int = 2):
    """Project rows onto their top principal components.

    Returns (coordinates, explained_variance_ratio).
    """
    x = matrix - matrix.mean(axis=0, keepdims=True)
    _, s, vt = np.linalg.svd(x, full_matrices=False)
    coords = x @ vt[:dims].T
    total = float((s**2).sum())
    ratio = (s[:dims] ** 2 / total) if total > 0 else np.zeros(dims)
    return coords, ratio
