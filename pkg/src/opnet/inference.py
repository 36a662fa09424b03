"""Full-image inference on a loaded checkpoint.

One code path shared by the CLI and the HTTP service, so both produce
byte-identical results for identical inputs.
"""

from __future__ import annotations

import numpy as np

from .basenet import crop_to, forward, pad_to_multiple
from .checkpoint import Checkpoint
from .hypernet import generate_weights
from .imageio import decode_png, encode_png
from .operators import OperatorError, edge_map
from .tensor import Tensor
from .training import encode_gamma


def encoded_gamma_for(ckpt: Checkpoint, operator: str | None, raw_gamma):
    """Validate a raw parameter against the checkpoint's registry and encode
    it; returns (encoded vector, spec)."""
    if operator is None:
        if len(ckpt.operators) != 1:
            raise OperatorError("multi-operator checkpoint: operator name required")
        spec = ckpt.operators[0]
    else:
        spec = ckpt.operator_by_name(operator)
    raw = float(np.atleast_1d(raw_gamma)[0])
    lo, hi = spec.bounds[0]
    if not (lo <= raw <= hi):
        raise OperatorError(
            f"parameter {raw} for {spec.name!r} outside bounds [{lo}, {hi}]"
        )
    return encode_gamma(spec, raw, joint=ckpt.m == 2), spec


def build_net_input(image: np.ndarray, dtype) -> tuple[Tensor, tuple[int, int]]:
    """(image || edge map), reflect-padded to a multiple of 4."""
    if image.ndim != 3 or image.shape[0] != 3:
        raise OperatorError(f"inference needs a (3,h,w) image, got {image.shape}")
    x = np.concatenate([image, edge_map(image)], axis=0)
    padded, size = pad_to_multiple(x, 4)
    return Tensor(padded[None].astype(dtype)), size


def infer_array(
    ckpt: Checkpoint,
    image: np.ndarray,
    operator: str | None,
    raw_gamma,
    net_input: np.ndarray | None = None,
) -> np.ndarray:
    """Run the base network with weights generated for raw_gamma.

    `net_input` overrides the (image || edge map) construction when the
    caller already holds the 4-channel network input (evaluation reuses the
    degraded input it built for the target pair).
    """
    enc, spec = encoded_gamma_for(ckpt, operator, raw_gamma)
    dt = ckpt.hp.a[0].dtype
    net_config = ckpt.config()
    weights = generate_weights(ckpt.hp, enc.astype(dt), net_config)
    if net_input is not None:
        padded, size = pad_to_multiple(net_input, 4)
        x = Tensor(padded[None].astype(dt))
    else:
        x, size = build_net_input(image, dt)
    out, _ = forward(x, weights, net_config, want_cache=False)
    pred = crop_to(out.data[0], size)
    return np.clip(pred.astype(np.float64), 0.0, 1.0)


def infer_png(
    ckpt: Checkpoint,
    png_bytes: bytes,
    operator: str | None,
    raw_gamma,
    reference_png: bytes | None = None,
):
    """PNG-in/PNG-out inference; returns (png bytes, psnr or None, ssim or None)."""
    from . import analysis

    image = decode_png(png_bytes)
    pred = infer_array(ckpt, image, operator, raw_gamma)
    out_bytes = encode_png(pred)
    p = s = None
    if reference_png is not None:
        ref = decode_png(reference_png)
        if ref.shape != pred.shape:
            raise OperatorError(
                f"reference shape {ref.shape} does not match output {pred.shape}"
            )
        p = analysis.psnr(pred, ref)
        s = analysis.ssim(pred, ref)
    return out_bytes, p, s
