"""Ground-truth parameterized image operators and the edge-map preprocessor.

Images are (channels, height, width) float arrays with values in [0, 1],
channels 1 or 3.  Every operator is a pure function of its arguments (noise
takes an explicit seed), so repeated calls are bit-identical.  Outputs are
clamped to [0, 1]; the clamped fraction is logged on the module logger.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

log = logging.getLogger("opnet.operators")

# half-quadratic splitting schedule for the L0 solver (published defaults)
L0_KAPPA = 2.0
L0_BETA_MAX = 1e5


class OperatorError(ValueError):
    pass


def _check_image(img: np.ndarray, name: str = "image") -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise OperatorError(f"{name} must be (c,h,w) with c in {{1,3}}, got {img.shape}")
    return img


def _clamp(arr: np.ndarray, op_name: str) -> np.ndarray:
    out = np.clip(arr, 0.0, 1.0)
    n_clamped = int(np.count_nonzero((arr < 0.0) | (arr > 1.0)))
    frac = n_clamped / arr.size
    log.debug("%s clamped %.5f%% of values", op_name, 100.0 * frac)
    return out


def clamp_fraction(arr: np.ndarray) -> float:
    """Fraction of values outside [0,1] (what _clamp would clip)."""
    return float(np.count_nonzero((arr < 0.0) | (arr > 1.0))) / arr.size


# ---------------------------------------------------------------------------
# edge map


def edge_map(img: np.ndarray) -> np.ndarray:
    """Quarter-sum of absolute 4-neighbour differences, averaged over channels.

    Out-of-range neighbours use replicate padding, so a constant image maps
    to exactly zero.  Returns a (1,h,w) array.
    """
    img = _check_image(img)
    c, h, w = img.shape
    if h < 2 or w < 2:
        raise OperatorError("edge map needs at least a 2x2 image")
    p = np.pad(img, ((0, 0), (1, 1), (1, 1)), mode="edge")
    center = p[:, 1:-1, 1:-1]
    e = (
        np.abs(center - p[:, 1:-1, :-2])
        + np.abs(center - p[:, 1:-1, 2:])
        + np.abs(center - p[:, :-2, 1:-1])
        + np.abs(center - p[:, 2:, 1:-1])
    )
    return 0.25 * e.sum(axis=0, keepdims=True)


# ---------------------------------------------------------------------------
# L0 gradient smoothing


def _psf2otf(psf: np.ndarray, shape) -> np.ndarray:
    pad = np.zeros(shape, dtype=np.float64)
    pad[: psf.shape[0], : psf.shape[1]] = psf
    for axis, k in enumerate(psf.shape):
        pad = np.roll(pad, -(k // 2), axis=axis)
    return np.fft.fft2(pad)


def l0_smooth(img: np.ndarray, lam: float, return_trace: bool = False):
    """L0 gradient minimization via half-quadratic splitting.

    Alternates the closed-form gradient threshold step (keep a pixel's
    auxiliary gradient iff its channel-summed squared gradient exceeds
    lam/beta) with a frequency-domain quadratic solve for the image, with
    beta growing geometrically from 2*lam by kappa=2 until it passes 1e5.

    With return_trace=True also returns the per-outer-iteration values
    (before, after) of the surrogate objective
        sum((S-I)^2) + sum_p min(lam, beta * |grad S|_p^2),
    whose second term counts nonzero-gradient pixels in the large-beta
    limit.  Both half-steps minimize their subproblem exactly, so the
    surrogate never increases within an outer iteration.
    """
    img = _check_image(img)
    if lam <= 0:
        raise OperatorError(f"lambda must be positive, got {lam}")
    if img.max() == img.min():
        # zero-gradient images are an exact fixed point
        return (img.copy(), []) if return_trace else img.copy()

    c, h, w = img.shape
    i64 = img.astype(np.float64)
    s = i64.copy()
    fi = np.fft.fft2(s, axes=(1, 2))
    otf_x = _psf2otf(np.array([[1.0, -1.0]]), (h, w))
    otf_y = _psf2otf(np.array([[1.0], [-1.0]]), (h, w))
    mtf = np.abs(otf_x) ** 2 + np.abs(otf_y) ** 2

    def grads(arr):
        gx = np.roll(arr, -1, axis=2) - arr
        gy = np.roll(arr, -1, axis=1) - arr
        return gx, gy

    def surrogate(arr, beta):
        gx, gy = grads(arr)
        mag2 = (gx**2 + gy**2).sum(axis=0)
        data = float(((arr - i64) ** 2).sum())
        return data + float(np.minimum(lam, beta * mag2).sum())

    trace = []
    beta = 2.0 * lam
    while beta < L0_BETA_MAX:
        before = surrogate(s, beta)
        gx, gy = grads(s)
        drop = (gx**2 + gy**2).sum(axis=0) < lam / beta
        hh = np.where(drop[None], 0.0, gx)
        vv = np.where(drop[None], 0.0, gy)
        # divergence of (hh, vv) with circular boundary
        div = (np.roll(hh, 1, axis=2) - hh) + (np.roll(vv, 1, axis=1) - vv)
        fs = (fi + beta * np.fft.fft2(div, axes=(1, 2))) / (1.0 + beta * mtf)[None]
        s = np.real(np.fft.ifft2(fs, axes=(1, 2)))
        trace.append((before, surrogate(s, beta)))
        beta *= L0_KAPPA

    out = _clamp(s, "l0_smooth").astype(img.dtype)
    return (out, trace) if return_trace else out


# ---------------------------------------------------------------------------
# separable Gaussian smoothing


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-d Gaussian with radius ceil(3*sigma)."""
    if sigma <= 0:
        raise OperatorError(f"sigma must be positive, got {sigma}")
    radius = int(np.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs**2) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_smooth(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with replicate borders."""
    img = _check_image(img)
    k = gaussian_kernel(sigma)
    out = img.astype(np.float64)
    out = correlate1d(out, k, axis=1, mode="nearest")
    out = correlate1d(out, k, axis=2, mode="nearest")
    return _clamp(out, "gaussian_smooth").astype(img.dtype)


# ---------------------------------------------------------------------------
# restoration degradations


def degrade_noise(img: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Additive white Gaussian noise; deterministic for a given seed."""
    img = _check_image(img)
    if sigma < 0:
        raise OperatorError(f"noise sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    noisy = img.astype(np.float64) + rng.normal(0.0, sigma, size=img.shape)
    return _clamp(noisy, "degrade_noise").astype(img.dtype)


def _cubic_weight(d: np.ndarray, a: float = -0.5) -> np.ndarray:
    ad = np.abs(d)
    w = np.where(
        ad <= 1.0,
        (a + 2.0) * ad**3 - (a + 3.0) * ad**2 + 1.0,
        np.where(ad < 2.0, a * ad**3 - 5.0 * a * ad**2 + 8.0 * a * ad - 4.0 * a, 0.0),
    )
    return w


def _reflect_index(idx: np.ndarray, n: int) -> np.ndarray:
    """Half-sample symmetric reflection of out-of-range indices."""
    idx = np.where(idx < 0, -1 - idx, idx)
    idx = np.where(idx >= n, 2 * n - 1 - idx, idx)
    return np.clip(idx, 0, n - 1)


def _resize_axis_cubic(arr: np.ndarray, new_len: int, axis: int) -> np.ndarray:
    """Catmull-Rom (a=-0.5) resampling along one axis, symmetric border."""
    old_len = arr.shape[axis]
    if new_len == old_len:
        return arr.copy()
    scale = new_len / old_len
    dst = np.arange(new_len, dtype=np.float64)
    src = (dst + 0.5) / scale - 0.5
    base = np.floor(src).astype(int)
    out = np.zeros(arr.shape[:axis] + (new_len,) + arr.shape[axis + 1 :], dtype=np.float64)
    for tap in range(-1, 3):
        idx = _reflect_index(base + tap, old_len)
        wgt = _cubic_weight(src - (base + tap))
        taken = np.take(arr, idx, axis=axis)
        shape = [1] * arr.ndim
        shape[axis] = new_len
        out += taken * wgt.reshape(shape)
    return out


def bicubic_resize(img: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    out = img.astype(np.float64)
    out = _resize_axis_cubic(out, new_h, axis=1)
    out = _resize_axis_cubic(out, new_w, axis=2)
    return out


def degrade_sr(img: np.ndarray, scale: int) -> np.ndarray:
    """Bicubic downsample by `scale`, then bicubic upsample back.

    The result has the original shape and serves as the network input for
    super-resolution training; the clean image is the target.
    """
    img = _check_image(img)
    scale = int(round(scale))
    if scale not in (2, 3, 4):
        raise OperatorError(f"sr scale must be one of 2, 3, 4, got {scale}")
    c, h, w = img.shape
    lo_h, lo_w = max(1, round(h / scale)), max(1, round(w / scale))
    low = bicubic_resize(img, lo_h, lo_w)
    back = bicubic_resize(low, h, w)
    return _clamp(back, "degrade_sr").astype(img.dtype)


# ---------------------------------------------------------------------------
# operator registry and pair synthesis


@dataclass(frozen=True)
class OperatorSpec:
    """Identity, parameter range and joint-training code of one operator."""

    name: str
    kind: str  # "filtering" | "restoration"
    bounds: tuple[tuple[float, float], ...]
    sampling: str  # "log" | "linear"
    id_code: float = 0.1
    param_dim: int = field(default=1)

    def __post_init__(self):
        if self.kind not in ("filtering", "restoration"):
            raise OperatorError(f"unknown operator kind {self.kind!r}")
        if self.sampling not in ("log", "linear"):
            raise OperatorError(f"unknown sampling mode {self.sampling!r}")
        if self.param_dim != len(self.bounds) or self.param_dim not in (1, 2):
            raise OperatorError("param_dim must be 1 or 2 and match bounds")
        for lo, hi in self.bounds:
            if lo <= 0 or hi < lo:
                raise OperatorError(f"bounds must satisfy 0 < l <= u, got ({lo}, {hi})")
            if hi / lo >= 10.0 and self.sampling != "log":
                raise OperatorError(
                    f"{self.name}: ratio u/l = {hi / lo:.1f} >= 10 requires log sampling"
                )
        if not (0.1 <= self.id_code <= 1.0):
            raise OperatorError(f"id_code must lie in [0.1, 1.0], got {self.id_code}")


_BUILTIN = {
    "l0": dict(kind="filtering", bounds=((0.002, 0.2),), sampling="log"),
    "gaussian": dict(kind="filtering", bounds=((0.5, 2.0),), sampling="linear"),
    "denoise": dict(kind="restoration", bounds=((15.0 / 255.0, 50.0 / 255.0),), sampling="linear"),
    "sr": dict(kind="restoration", bounds=((2.0, 4.0),), sampling="linear"),
}


def make_operator_spec(name: str, index: int = 0, bounds=None) -> OperatorSpec:
    """Build one built-in operator spec; id code is (index+1)/10."""
    if name not in _BUILTIN:
        raise OperatorError(f"unknown operator {name!r}; known: {sorted(_BUILTIN)}")
    cfg = dict(_BUILTIN[name])
    if bounds is not None:
        cfg["bounds"] = tuple(tuple(b) for b in bounds)
        lo, hi = cfg["bounds"][0]
        cfg["sampling"] = "log" if lo > 0 and hi / lo >= 10.0 else "linear"
    if index < 0 or index > 9:
        raise OperatorError("at most 10 operators can share a registry")
    return OperatorSpec(name=name, id_code=(index + 1) / 10.0, **cfg)


def build_operator_specs(names, bounds_overrides=None) -> list[OperatorSpec]:
    overrides = bounds_overrides or {}
    specs = [make_operator_spec(n, i, overrides.get(n)) for i, n in enumerate(names)]
    codes = [s.id_code for s in specs]
    if len(set(codes)) != len(codes):
        raise OperatorError("operator id codes must be distinct")
    return specs


def apply_operator(spec: OperatorSpec, gamma, img: np.ndarray, seed: int = 0) -> np.ndarray:
    """Run the ground-truth operator f(gamma, I)."""
    g = float(np.atleast_1d(gamma)[0])
    lo, hi = spec.bounds[0]
    if not (lo <= g <= hi):
        raise OperatorError(f"{spec.name}: parameter {g} outside bounds [{lo}, {hi}]")
    if spec.name == "l0":
        return l0_smooth(img, g)
    if spec.name == "gaussian":
        return gaussian_smooth(img, g)
    if spec.name == "denoise":
        return degrade_noise(img, g, seed)
    if spec.name == "sr":
        return degrade_sr(img, int(round(g)))
    raise OperatorError(f"no oracle for operator {spec.name!r}")


def make_pair(spec: OperatorSpec, gamma, img: np.ndarray, seed: int = 0):
    """Synthesize one (network input, target) training pair.

    Filtering: input is the image plus its edge map, target is f(gamma, I).
    Restoration: input is the degraded image plus the degraded image's edge
    map, target is the clean image.  The edge map is always computed on the
    image the network actually sees.
    """
    img = _check_image(img)
    if img.shape[0] != 3:
        raise OperatorError("training pairs need RGB images")
    out = apply_operator(spec, gamma, img, seed)
    if spec.kind == "filtering":
        net_in, target = img, out
    else:
        net_in, target = out, img
    x = np.concatenate([net_in, edge_map(net_in)], axis=0)
    return x, target
