"""Integer-only mask rasterization: brushed lines, polylines, triangles, dilation.

Every primitive writes into a boolean (h, w) mask and clips at its edges; it
returns True when some geometry fell outside the mask.
"""
from __future__ import annotations

import numpy as np


def _stamp(mask, x, y, width):
    h, w = mask.shape
    r0 = width // 2
    x0, y0 = x - r0, y - r0
    x1, y1 = x0 + width, y0 + width
    clipped = x0 < 0 or y0 < 0 or x1 > w or y1 > h
    xa, ya = max(x0, 0), max(y0, 0)
    xb, yb = min(x1, w), min(y1, h)
    if xa < xb and ya < yb:
        mask[ya:yb, xa:xb] = True
    return clipped


def bresenham(x0, y0, x1, y1):
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    pts = []
    while True:
        pts.append((x0, y0))
        if x0 == x1 and y0 == y1:
            return pts
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def draw_line(mask, p0, p1, width=1):
    clipped = False
    for x, y in bresenham(int(p0[0]), int(p0[1]), int(p1[0]), int(p1[1])):
        clipped |= _stamp(mask, x, y, width)
    return clipped


def draw_polyline(mask, points, width=1):
    if len(points) == 1:
        return _stamp(mask, int(points[0][0]), int(points[0][1]), width)
    clipped = False
    for a, b in zip(points, points[1:]):
        clipped |= draw_line(mask, a, b, width)
    return clipped


def stroke_rect(mask, rect, width=1):
    x, y, w, h = (int(v) for v in rect)
    corners = [(x, y), (x + w - 1, y), (x + w - 1, y + h - 1), (x, y + h - 1), (x, y)]
    return draw_polyline(mask, corners, width)


def fill_triangle(mask, a, b, c):
    """Fill pixels whose centres lie inside (or on) the triangle ``abc``."""
    h, w = mask.shape
    pts = [(2 * int(p[0]), 2 * int(p[1])) for p in (a, b, c)]
    (ax, ay), (bx, by), (cx, cy) = pts
    area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if area == 0:
        return draw_polyline(mask, [a, b, c], 1)
    if area < 0:
        (bx, by), (cx, cy) = (cx, cy), (bx, by)
    xs = [p[0] // 2 for p in pts]
    ys = [p[1] // 2 for p in pts]
    clipped = min(xs) < 0 or min(ys) < 0 or max(xs) >= w or max(ys) >= h
    x_lo, x_hi = max(min(xs), 0), min(max(xs), w - 1)
    y_lo, y_hi = max(min(ys), 0), min(max(ys), h - 1)
    if x_lo > x_hi or y_lo > y_hi:
        return clipped
    gy, gx = np.mgrid[y_lo:y_hi + 1, x_lo:x_hi + 1]
    px, py = 2 * gx + 1, 2 * gy + 1

    def edge(x0, y0, x1, y1):
        return (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)

    inside = (edge(ax, ay, bx, by) >= 0) & (edge(bx, by, cx, cy) >= 0) & (edge(cx, cy, ax, ay) >= 0)
    mask[y_lo:y_hi + 1, x_lo:x_hi + 1] |= inside
    return clipped


def dilate(mask, radius):
    """Chebyshev dilation by ``radius`` pixels (square structuring element)."""
    out = mask.copy()
    if radius <= 0:
        return out
    h, w = mask.shape
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if dx == 0 and dy == 0:
                continue
            ys, yd = (slice(0, h - dy), slice(dy, h)) if dy >= 0 else (slice(-dy, h), slice(0, h + dy))
            xs, xd = (slice(0, w - dx), slice(dx, w)) if dx >= 0 else (slice(-dx, w), slice(0, w + dx))
            out[yd, xd] |= mask[ys, xs]
    return out


def paint(layer, mask, color):
    """Write an opaque RGBA colour into ``layer`` (h, w, 4) wherever ``mask`` is set."""
    rgba = tuple(color) + (255,) if len(color) == 3 else tuple(color)
    layer[mask] = rgba
    return layer
