"""Procedural training images: smooth gradients, polygons and noise textures.

Images deliberately span (almost) the full [0,1] range and carry texture
everywhere: the base network's instance normalization discards absolute
brightness/contrast, so those must be inferable from image structure for
reconstruction tasks to be well posed.  A small fraction of near-flat
midtone images is mixed in so the trained models behave sanely on flat
inputs.
"""

from __future__ import annotations

import numpy as np


def _bilinear_upsample(grid: np.ndarray, h: int, w: int) -> np.ndarray:
    """Upsample a (gh, gw) grid to (h, w) with bilinear interpolation."""
    gh, gw = grid.shape
    ys = np.linspace(0, gh - 1, h)
    xs = np.linspace(0, gw - 1, w)
    y0 = np.clip(np.floor(ys).astype(int), 0, gh - 2)
    x0 = np.clip(np.floor(xs).astype(int), 0, gw - 2)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    a = grid[np.ix_(y0, x0)]
    b = grid[np.ix_(y0, x0 + 1)]
    c = grid[np.ix_(y0 + 1, x0)]
    d = grid[np.ix_(y0 + 1, x0 + 1)]
    return a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx + c * fy * (1 - fx) + d * fy * fx


def _fill_polygon(canvas: np.ndarray, verts: np.ndarray, color: np.ndarray):
    """Rasterize a convex polygon given as (k,2) vertices in pixel units."""
    h, w = canvas.shape[1:]
    yy, xx = np.mgrid[0:h, 0:w]
    px = xx + 0.5
    py = yy + 0.5
    inside = np.ones((h, w), dtype=bool)
    k = len(verts)
    # consistent winding: signed area decides the inequality direction
    area = 0.0
    for i in range(k):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % k]
        area += x1 * y2 - x2 * y1
    sign = 1.0 if area > 0 else -1.0
    for i in range(k):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % k]
        cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        inside &= sign * cross >= 0
    canvas[:, inside] = color[:, None]


def generate_image(size: int, rng: np.random.Generator, flat: bool = False) -> np.ndarray:
    """One synthetic (3, size, size) RGB image in [0,1]."""
    if flat:
        base = rng.uniform(0.25, 0.75)
        img = np.full((3, size, size), base)
        img += rng.normal(0.0, 0.01, size=img.shape)
        return np.clip(img, 0.0, 1.0)

    img = np.zeros((3, size, size))
    for c in range(3):
        g = rng.integers(2, 5)
        img[c] = 0.2 + 0.6 * _bilinear_upsample(rng.uniform(0, 1, size=(g, g)), size, size)

    # alternating near-black and near-white polygons (neutral colors with
    # small chroma jitter) anchor every channel's black and white point:
    # the base network's normalization discards per-channel gain/offset,
    # so the corpus pins them the way exposure pins natural photos
    n_shapes = int(rng.integers(6, 10))
    for j in range(n_shapes):
        k = int(rng.integers(3, 6))
        center = rng.uniform(0.05 * size, 0.95 * size, size=2)
        radii = rng.uniform(0.07 * size, 0.20 * size, size=k)
        angles = np.sort(rng.uniform(0, 2 * np.pi, size=k))
        verts = np.stack(
            [center[0] + radii * np.cos(angles), center[1] + radii * np.sin(angles)], axis=1
        )
        if j % 2 == 0:
            base = rng.uniform(0.0, 0.08)
        else:
            base = rng.uniform(0.92, 1.0)
        color = np.clip(base + rng.uniform(-0.02, 0.02, size=3), 0.0, 1.0)
        _fill_polygon(img, verts, color)

    for scale in (size // 8, size // 4):
        if scale >= 2:
            amp = rng.uniform(0.005, 0.02)
            tex = _bilinear_upsample(rng.uniform(-1, 1, size=(scale, scale)), size, size)
            img += amp * tex[None]
    img += rng.normal(0.0, 0.002, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def generate_corpus(
    n: int, size: int, seed: int, flat_fraction: float = 0.05
) -> list[np.ndarray]:
    """Deterministic list of n synthetic images."""
    children = np.random.SeedSequence(seed).spawn(n)
    images = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        flat = rng.uniform() < flat_fraction
        images.append(generate_image(size, rng, flat=flat))
    return images


def streamed_image(size: int, seed: int, index: int, flat_fraction: float = 0.05) -> np.ndarray:
    """Deterministic image for (seed, index) without materializing a corpus."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))
    flat = rng.uniform() < flat_fraction
    return generate_image(size, rng, flat=flat)
