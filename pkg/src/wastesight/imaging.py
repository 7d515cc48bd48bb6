"""Image I/O and low-level raster helpers shared across the pipeline."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .core import DecodeError, RasterImage


def load_image(path: str | Path) -> RasterImage:
    """Decode a PNG/JPEG file into an RGB raster. Raises DecodeError."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    return RasterImage(arr)


def save_png(image: RasterImage, path: str | Path) -> None:
    Image.fromarray(image.pixels, mode="RGB").save(path, format="PNG")


def resize_bilinear(pixels: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resample to (out_h, out_w), half-pixel centers, edge clamp.

    Accepts (h, w) or (h, w, c) arrays of any numeric dtype; returns float64
    without rescaling values.
    """
    src = np.asarray(pixels, dtype=np.float64)
    in_h, in_w = src.shape[0], src.shape[1]
    if out_w < 1 or out_h < 1:
        raise ValueError("output dimensions must be positive")

    def axis_coords(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pos = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_in - 1.0)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    x0, x1, fx = axis_coords(out_w, in_w)
    y0, y1, fy = axis_coords(out_h, in_h)

    # horizontal pass, then vertical
    rows = src[:, x0] * (1.0 - fx)[None, :, None] + src[:, x1] * fx[None, :, None] \
        if src.ndim == 3 else src[:, x0] * (1.0 - fx) + src[:, x1] * fx
    if src.ndim == 3:
        out = rows[y0] * (1.0 - fy)[:, None, None] + rows[y1] * fy[:, None, None]
    else:
        out = rows[y0] * (1.0 - fy)[:, None] + rows[y1] * fy[:, None]
    return out


def resize_image(image: RasterImage, out_w: int, out_h: int) -> RasterImage:
    """Bilinear-resize a raster, rounding back to 8-bit samples."""
    out = resize_bilinear(image.pixels, out_w, out_h)
    return RasterImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def draw_disk(canvas: np.ndarray, cx: float, cy: float, radius: float,
              color: tuple[int, int, int]) -> None:
    """Paint a filled disk onto a writable (h, w, 3) uint8 array, clipped."""
    h, w = canvas.shape[:2]
    x_lo = max(0, int(np.floor(cx - radius)))
    x_hi = min(w - 1, int(np.ceil(cx + radius)))
    y_lo = max(0, int(np.floor(cy - radius)))
    y_hi = min(h - 1, int(np.ceil(cy + radius)))
    if x_lo > x_hi or y_lo > y_hi:
        return
    ys, xs = np.mgrid[y_lo:y_hi + 1, x_lo:x_hi + 1]
    mask = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius ** 2
    canvas[y_lo:y_hi + 1, x_lo:x_hi + 1][mask] = color


def draw_ellipse_outline(canvas: np.ndarray, cx: float, cy: float, a: float, b: float,
                         theta: float, color: tuple[int, int, int],
                         thickness: int = 2) -> None:
    """Stroke an ellipse outline (semi-axes a, b rotated by theta), clipped.

    The curve is rasterized by dense parametric sampling; each sample is
    stamped as a thickness x thickness block for a hard-edged stroke.
    """
    h, w = canvas.shape[:2]
    n = max(64, int(8.0 * np.pi * max(a, b)))
    t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    ct, st = np.cos(theta), np.sin(theta)
    px = cx + a * np.cos(t) * ct - b * np.sin(t) * st
    py = cy + a * np.cos(t) * st + b * np.sin(t) * ct
    half = thickness / 2.0
    x_lo = np.floor(px - half + 0.5).astype(np.int64)
    y_lo = np.floor(py - half + 0.5).astype(np.int64)
    for dx in range(thickness):
        for dy in range(thickness):
            xs = x_lo + dx
            ys = y_lo + dy
            keep = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
            canvas[ys[keep], xs[keep]] = color
