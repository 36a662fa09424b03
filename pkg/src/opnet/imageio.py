"""PNG and binary PPM (P6) image I/O.

All internal math uses (c, h, w) float arrays in [0, 1]; files are 8-bit.
Quantization is round-half-up so repeated encodes are bit-identical.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image as PILImage


def to_uint8(img: np.ndarray) -> np.ndarray:
    """[0,1] floats -> 0..255 with round-half-up."""
    q = np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5)
    return q.astype(np.uint8)


def from_uint8(arr: np.ndarray) -> np.ndarray:
    return arr.astype(np.float64) / 255.0


def _chw_to_hwc(img: np.ndarray) -> np.ndarray:
    return np.transpose(img, (1, 2, 0))


def _hwc_to_chw(arr: np.ndarray) -> np.ndarray:
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return np.transpose(arr, (2, 0, 1))


def encode_png(img: np.ndarray) -> bytes:
    """Encode a (c,h,w) float image as 8-bit PNG bytes."""
    q = to_uint8(img)
    hwc = _chw_to_hwc(q)
    mode = "RGB" if img.shape[0] == 3 else "L"
    pil = PILImage.fromarray(hwc if mode == "RGB" else hwc[:, :, 0], mode=mode)
    buf = io.BytesIO()
    pil.save(buf, format="PNG", compress_level=6)
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    """Decode PNG bytes to a (3,h,w) float image in [0,1]."""
    pil = PILImage.open(io.BytesIO(data))
    pil = pil.convert("RGB")
    return from_uint8(_hwc_to_chw(np.asarray(pil)))


def png_dimensions(data: bytes) -> tuple[int, int]:
    """(height, width) from the PNG header without decoding pixel data."""
    pil = PILImage.open(io.BytesIO(data))
    return pil.height, pil.width


def is_png(data: bytes) -> bool:
    return data[:8] == b"\x89PNG\r\n\x1a\n"


def save_png(path, img: np.ndarray):
    Path(path).write_bytes(encode_png(img))


def load_png(path) -> np.ndarray:
    return decode_png(Path(path).read_bytes())


def save_ppm(path, img: np.ndarray):
    """Write binary PPM (P6), maxval 255."""
    if img.shape[0] != 3:
        raise ValueError("PPM P6 requires a 3-channel image")
    q = _chw_to_hwc(to_uint8(img))
    h, w = q.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(q.tobytes())


def load_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(b"P6"):
        raise ValueError("not a binary PPM (P6) file")
    # header: magic, width, height, maxval, then raw samples
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise ValueError(f"only maxval 255 PPMs supported, got {maxval}")
    raw = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos)
    return from_uint8(_hwc_to_chw(raw.reshape(h, w, 3)))


def load_image(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        return load_ppm(path)
    return load_png(path)
