"""Quality metrics and input-gradient receptive-field probing.

The effective receptive field of an output point p is the set of input
pixels whose backpropagated gradient magnitude exceeds 0.025 of the global
maximum, with the output cotangent set to one at p in all three channels
and zero elsewhere.  Gradient magnitude at a pixel is the max over input
channels; the threshold is relative, so the mask is invariant to positive
scaling of the cotangent.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .basenet import BaseNetConfig, InjectedWeights, backward, forward
from .tensor import Tensor

log = logging.getLogger("opnet.analysis")

RF_THRESHOLD_RATIO = 0.025
PSNR_CAP_DB = 99.0


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10*log10(1/mse) for [0,1] images, capped at 99 dB for identical pairs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"psnr shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(1.0 / mse))


def _window_means(x: np.ndarray, win: int) -> np.ndarray:
    """Means of all win x win sliding windows (valid positions) per channel."""
    c, h, w = x.shape
    cum = np.cumsum(np.cumsum(x, axis=1), axis=2)
    cum = np.pad(cum, ((0, 0), (1, 0), (1, 0)))
    s = (
        cum[:, win:, win:]
        - cum[:, :-win, win:]
        - cum[:, win:, :-win]
        + cum[:, :-win, :-win]
    )
    return s / (win * win)


def ssim(a: np.ndarray, b: np.ndarray, window: int = 8, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean structural similarity over uniform sliding windows, averaged
    across channels; exactly 1 for identical images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"ssim shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 3:
        raise ValueError("ssim expects (c,h,w) images")
    if a.shape[1] < window or a.shape[2] < window:
        raise ValueError(f"images smaller than the {window}x{window} ssim window")
    c1 = (k1 * 1.0) ** 2
    c2 = (k2 * 1.0) ** 2
    mu_a = _window_means(a, window)
    mu_b = _window_means(b, window)
    var_a = _window_means(a * a, window) - mu_a**2
    var_b = _window_means(b * b, window) - mu_b**2
    cov = _window_means(a * b, window) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass
class RFMask:
    mask: np.ndarray  # bool (h, w)
    point: tuple[int, int]  # (x, y)
    gamma: float | np.ndarray
    threshold_ratio: float = RF_THRESHOLD_RATIO

    @property
    def area(self) -> int:
        return int(self.mask.sum())

    def coordinates(self):
        ys, xs = np.nonzero(self.mask)
        return list(zip(xs.tolist(), ys.tolist()))


def rf_input_gradient(
    net_config: BaseNetConfig,
    weights: InjectedWeights,
    x: Tensor,
    point: tuple[int, int],
    cotangent_scale: float = 1.0,
) -> np.ndarray:
    """Backpropagate a single-point cotangent to the input; returns (c,h,w)."""
    px, py = point
    out, cache = forward(x, weights, net_config)
    _, _, oh, ow = out.shape
    if not (0 <= px < ow and 0 <= py < oh):
        raise ValueError(f"point ({px},{py}) outside output extent {ow}x{oh}")
    cot = np.zeros_like(out.data)
    cot[0, :, py, px] = cotangent_scale
    _, _, grad_in = backward(cache, weights, net_config, Tensor(cot))
    return grad_in.data[0]


def mask_from_gradient(grad: np.ndarray, ratio: float = RF_THRESHOLD_RATIO) -> np.ndarray:
    """Threshold at ratio * global max of the per-pixel channel-max magnitude."""
    mag = np.abs(grad).max(axis=0)
    gmax = mag.max()
    if gmax == 0:
        log.warning("all-zero input gradient: empty receptive-field mask")
        return np.zeros_like(mag, dtype=bool)
    return mag > ratio * gmax


def effective_receptive_field(
    ckpt, image: np.ndarray, gamma, point: tuple[int, int], operator: str | None = None
) -> RFMask:
    """Receptive-field mask of a checkpointed model at one image point."""
    from .inference import build_net_input, encoded_gamma_for

    net_config = ckpt.config()
    enc, _ = encoded_gamma_for(ckpt, operator, gamma)
    from .hypernet import generate_weights

    weights = generate_weights(ckpt.hp, enc.astype(ckpt.hp.a[0].dtype), net_config)
    x, size = build_net_input(image, ckpt.hp.a[0].dtype)
    grad = rf_input_gradient(net_config, weights, x, point)
    mask = mask_from_gradient(grad[:, : size[0], : size[1]])
    return RFMask(mask=mask, point=point, gamma=gamma)


def rf_area_report(ckpt, image, points, gammas, operator: str | None = None):
    """Mask areas for every (point, gamma) combination."""
    rows = []
    for p in points:
        for g in gammas:
            rf = effective_receptive_field(ckpt, image, g, p, operator)
            rows.append({"point": tuple(p), "gamma": float(g), "area": rf.area})
    return rows


def rf_overlay(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Green mask over the grayscale input, (3,h,w) in [0,1]."""
    if image.shape[0] == 3:
        gray = 0.299 * image[0] + 0.587 * image[1] + 0.114 * image[2]
    else:
        gray = image[0]
    out = np.stack([gray, gray, gray])
    g = np.where(mask, 0.35 * gray + 0.65, out[1])
    r = np.where(mask, 0.35 * gray, out[0])
    b = np.where(mask, 0.35 * gray, out[2])
    return np.clip(np.stack([r, g, b]), 0.0, 1.0)


def write_mask_csv(path, rf: RFMask):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["x", "y"])
        for x, y in rf.coordinates():
            writer.writerow([x, y])
