"""HTTP inference service exposing one loaded checkpoint.

The checkpoint is immutable shared state; each request regenerates weights
from its parameters and owns its tensors, so concurrent requests are safe.
The only mutable state is the most recent inference input, kept so the
receptive-field endpoint can probe the image the user is looking at.
"""

from __future__ import annotations

import threading

import numpy as np
from fastapi import FastAPI, File, Form, UploadFile
from fastapi.responses import JSONResponse, Response

from . import analysis
from .checkpoint import CheckpointError, load_checkpoint
from .imageio import decode_png, encode_png, is_png, png_dimensions
from .inference import infer_png
from .operators import OperatorError

DEFAULT_MAX_SIDE = 1024


def _bounds_error(field: str, bound, given) -> JSONResponse:
    return JSONResponse(
        status_code=400,
        content={"field": field, "bound": bound, "given": given},
    )


def create_app(checkpoint, max_side: int = DEFAULT_MAX_SIDE) -> FastAPI:
    """Build the service around a loaded checkpoint (or a path to one)."""
    if isinstance(checkpoint, (str, bytes)) or hasattr(checkpoint, "__fspath__"):
        checkpoint = load_checkpoint(checkpoint)
    app = FastAPI(title="opnet inference service")
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
        expose_headers=["X-PSNR", "X-SSIM"],
    )
    app.state.checkpoint = checkpoint
    app.state.max_side = max_side
    app.state.last_image = None  # (3,h,w) input of the most recent /infer
    app.state.lock = threading.Lock()

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/operators")
    def operators():
        return [
            {
                "name": s.name,
                "bounds": [list(b) for b in s.bounds],
                "sampling": s.sampling,
                "param_dim": s.param_dim,
            }
            for s in checkpoint.operators
        ]

    @app.post("/infer")
    async def infer(
        image: UploadFile = File(...),
        operator: str = Form(None),
        param: str = Form(...),
        reference: UploadFile | None = File(None),
    ):
        payload = await image.read()
        if not is_png(payload):
            return JSONResponse(status_code=415, content={"detail": "image must be PNG"})
        h, w = png_dimensions(payload)
        if h > app.state.max_side or w > app.state.max_side:
            return JSONResponse(
                status_code=413,
                content={
                    "detail": f"image {w}x{h} exceeds the {app.state.max_side} pixel limit"
                },
            )
        try:
            values = [float(v) for v in param.split(",") if v.strip()]
        except ValueError:
            return _bounds_error("param", None, param)
        if not values:
            return _bounds_error("param", None, param)
        try:
            spec = (
                checkpoint.operators[0]
                if operator is None and len(checkpoint.operators) == 1
                else checkpoint.operator_by_name(operator)
            )
        except CheckpointError:
            return _bounds_error(
                "operator", [s.name for s in checkpoint.operators], operator
            )
        lo, hi = spec.bounds[0]
        if not (lo <= values[0] <= hi):
            return _bounds_error("param", [lo, hi], values[0])
        ref_payload = None
        if reference is not None:
            ref_payload = await reference.read()
            if ref_payload and not is_png(ref_payload):
                return JSONResponse(
                    status_code=415, content={"detail": "reference must be PNG"}
                )
            if not ref_payload:
                ref_payload = None
        try:
            out_bytes, p, s = infer_png(checkpoint, payload, spec.name, values[0], ref_payload)
        except OperatorError as exc:
            return _bounds_error("param", [lo, hi], str(exc))
        with app.state.lock:
            app.state.last_image = decode_png(payload)
        headers = {}
        if p is not None:
            headers["X-PSNR"] = f"{p:.4f}"
            headers["X-SSIM"] = f"{s:.6f}"
        return Response(content=out_bytes, media_type="image/png", headers=headers)

    @app.get("/rf")
    def rf(x: int, y: int, gamma: float, operator: str | None = None):
        with app.state.lock:
            image = app.state.last_image
        if image is None:
            return JSONResponse(
                status_code=409,
                content={"detail": "no image inferred yet; POST /infer first"},
            )
        try:
            spec = (
                checkpoint.operators[0]
                if operator is None and len(checkpoint.operators) == 1
                else checkpoint.operator_by_name(operator)
            )
        except CheckpointError:
            return _bounds_error(
                "operator", [s.name for s in checkpoint.operators], operator
            )
        lo, hi = spec.bounds[0]
        if not (lo <= gamma <= hi):
            return _bounds_error("gamma", [lo, hi], gamma)
        _, h, w = image.shape
        if not (0 <= x < w and 0 <= y < h):
            return _bounds_error("point", [w, h], [x, y])
        mask = analysis.effective_receptive_field(checkpoint, image, gamma, (x, y), spec.name)
        overlay = analysis.rf_overlay(image, mask.mask)
        return Response(content=encode_png(overlay), media_type="image/png")

    return app


def serve(checkpoint_path, port: int = 8000, host: str = "127.0.0.1", max_side: int = DEFAULT_MAX_SIDE):
    import uvicorn

    app = create_app(checkpoint_path, max_side=max_side)
    uvicorn.run(app, host=host, port=port, log_level="info")
