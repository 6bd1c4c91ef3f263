from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np


class CanvasError(ValueError):
    pass


@dataclass
class Canvas:
    """Straight-alpha RGBA8 raster; ``pixels`` has shape (height, width, 4)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 4 or px.shape[0] < 1 or px.shape[1] < 1:
            raise CanvasError(f"pixels must be (h>=1, w>=1, 4), got {px.shape}")
        self.pixels = np.ascontiguousarray(px, dtype=np.uint8)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def rgb(self) -> np.ndarray:
        return self.pixels[..., :3]

    def copy(self) -> "Canvas":
        return Canvas(self.pixels.copy())

    def __eq__(self, other):
        return isinstance(other, Canvas) and np.array_equal(self.pixels, other.pixels)

    @classmethod
    def blank(cls, width, height, color=(255, 255, 255, 255)):
        if width < 1 or height < 1:
            raise CanvasError("canvas dimensions must be >= 1")
        if len(color) == 3:
            color = (*color, 255)
        px = np.empty((height, width, 4), dtype=np.uint8)
        px[...] = color
        return cls(px)

    @classmethod
    def from_rgb(cls, rgb):
        rgb = np.asarray(rgb, dtype=np.uint8)
        alpha = np.full(rgb.shape[:2] + (1,), 255, dtype=np.uint8)
        return cls(np.concatenate([rgb, alpha], axis=2))

    def to_ppm(self) -> bytes:
        header = f"P6\n{self.width} {self.height}\n255\n".encode("ascii")
        return header + self.rgb.tobytes()

    def save_ppm(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_ppm())


_PPM_HEADER = re.compile(rb"P6\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s")


def from_ppm(blob: bytes) -> Canvas:
    """Decode binary P6 (maxval 255); alpha is set to 255."""
    m = _PPM_HEADER.match(blob)
    if not m:
        raise CanvasError("not a binary PPM (P6) image")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise CanvasError(f"unsupported maxval {maxval}")
    start = m.end()
    need = w * h * 3
    body = blob[start:start + need]
    if len(body) != need:
        raise CanvasError(f"PPM body truncated: expected {need} bytes, got {len(body)}")
    return Canvas.from_rgb(np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3))


def load_ppm(path) -> Canvas:
    with open(path, "rb") as fh:
        return from_ppm(fh.read())


def composite_over(dst: Canvas, src: Canvas) -> Canvas:
    """Source-over compositing of straight-alpha ``src`` onto opaque ``dst``.

    Channels are rounded half-up; the result is fully opaque.
    """
    if dst.pixels.shape != src.pixels.shape:
        raise CanvasError(f"size mismatch: {dst.pixels.shape[:2]} vs {src.pixels.shape[:2]}")
    a = src.pixels[..., 3:4].astype(np.int64)
    num = src.pixels[..., :3].astype(np.int64) * a + dst.pixels[..., :3].astype(np.int64) * (255 - a)
    # floor(num / 255 + 1/2) without leaving integers
    rgb = (2 * num + 255) // 510
    out = np.empty_like(dst.pixels)
    out[..., :3] = rgb
    out[..., 3] = 255
    return Canvas(out)


def luminance(canvas: Canvas, region=None) -> float:
    """Perceptual luminance of a region ``(x, y, w, h)``; whole canvas if ``region`` is None."""
    if region is None:
        region = (0, 0, canvas.width, canvas.height)
    x, y, w, h = (int(v) for v in region)
    if w <= 0 or h <= 0:
        raise CanvasError("empty luminance region")
    if x < 0 or y < 0 or x + w > canvas.width or y + h > canvas.height:
        raise CanvasError(f"region {region} outside {canvas.width}x{canvas.height} canvas")
    crop = canvas.pixels[y:y + h, x:x + w, :3].astype(np.float64)
    mu = crop.reshape(-1, 3).mean(axis=0)
    return float(0.299 * mu[0] + 0.587 * mu[1] + 0.114 * mu[2])
