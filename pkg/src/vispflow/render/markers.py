"""Visual markers drawn onto canvases: force arrows, boxes, trajectories, doodles.

Angles follow screen convention with y pointing down: 0 rad points right,
pi/2 points up.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .canvas import Canvas, composite_over
from .glyphs import default_font
from .layout import layout_bbox, tokenize
from .raster import draw_line, draw_polyline, fill_triangle, paint, stroke_rect
from .text import text_mask

MARKER_COLORS = [(255, 0, 0), (0, 160, 255), (255, 200, 0), (0, 200, 0), (255, 0, 255)]


class MarkerError(ValueError):
    pass


@dataclass
class Arrow:
    origin: tuple
    angle: float
    magnitude: float
    color: Optional[tuple] = None
    width: Optional[int] = None


@dataclass
class BBox:
    rect: tuple  # (x, y, w, h)
    color: Optional[tuple] = None
    label: str = ""
    width: Optional[int] = None


@dataclass
class Trajectory:
    points: list
    thickness: Optional[int] = None
    color: Optional[tuple] = None


@dataclass
class Doodle:
    strokes: list
    color: Optional[tuple] = None
    width: Optional[int] = None


MarkerSpec = Union[Arrow, BBox, Trajectory, Doodle]


@dataclass
class MarkerRanges:
    """Bounds for attributes left unset on a spec (drawn from the rng)."""

    shaft_min: int = 20
    shaft_max: int = 100
    width_range: tuple = (2, 4)
    start_jitter: int = 0
    colors: list = field(default_factory=lambda: list(MARKER_COLORS))


@dataclass
class MarkerResult:
    canvas: Canvas
    clipped: bool
    record: dict


def shaft_length(magnitude: float, shaft_min: float, shaft_max: float) -> float:
    return shaft_min + magnitude * (shaft_max - shaft_min)


def _validate(spec, canvas):
    if isinstance(spec, Arrow):
        if not 0.0 <= spec.magnitude <= 1.0:
            raise MarkerError(f"arrow magnitude {spec.magnitude} outside [0, 1]")
    elif isinstance(spec, BBox):
        x, y, w, h = spec.rect
        if w < 1 or h < 1:
            raise MarkerError("bbox needs positive size")
    elif isinstance(spec, Trajectory):
        if not spec.points:
            raise MarkerError("trajectory polyline is empty")
    elif isinstance(spec, Doodle):
        if not spec.strokes or any(not s for s in spec.strokes):
            raise MarkerError("doodle strokes must be non-empty polylines")
    else:
        raise MarkerError(f"unknown marker spec {type(spec).__name__}")


def _outside(points, canvas):
    return any(not (0 <= p[0] < canvas.width and 0 <= p[1] < canvas.height) for p in points)


def render_marker(canvas: Canvas, spec: MarkerSpec, rng, ranges: MarkerRanges = None) -> MarkerResult:
    """Draw one marker; unset colour/width come from ``rng``. Geometry is clipped, never rejected."""
    r = ranges or MarkerRanges()
    _validate(spec, canvas)
    color = getattr(spec, "color", None)
    if color is None:
        color = r.colors[int(rng.integers(len(r.colors)))]
    width_attr = "thickness" if isinstance(spec, Trajectory) else "width"
    width = getattr(spec, width_attr)
    if width is None:
        width = int(rng.integers(r.width_range[0], r.width_range[1] + 1))
    spec = replace(spec, color=tuple(color), **{width_attr: int(width)})

    mask = np.zeros((canvas.height, canvas.width), dtype=bool)
    record = {"kind": type(spec).__name__.lower(), "color": list(spec.color), "width": int(width)}
    if isinstance(spec, Arrow):
        clipped = _draw_arrow(mask, spec, r, rng, record)
    elif isinstance(spec, BBox):
        clipped = stroke_rect(mask, spec.rect, width) or _outside(
            [(spec.rect[0], spec.rect[1]), (spec.rect[0] + spec.rect[2] - 1, spec.rect[1] + spec.rect[3] - 1)],
            canvas)
        if spec.label:
            _draw_label(mask, spec)
        record["rect"] = list(spec.rect)
        record["label"] = spec.label
    elif isinstance(spec, Trajectory):
        clipped = draw_polyline(mask, spec.points, width) or _outside(spec.points, canvas)
        record["points"] = [list(p) for p in spec.points]
    else:
        clipped = False
        for stroke in spec.strokes:
            clipped |= draw_polyline(mask, stroke, width) or _outside(stroke, canvas)
        record["strokes"] = [[list(p) for p in s] for s in spec.strokes]

    layer = np.zeros_like(canvas.pixels)
    paint(layer, mask, spec.color)
    return MarkerResult(composite_over(canvas, Canvas(layer)), bool(clipped), record)


def _draw_arrow(mask, spec: Arrow, r: MarkerRanges, rng, record):
    ox, oy = spec.origin
    if r.start_jitter:
        ox += int(rng.integers(-r.start_jitter, r.start_jitter + 1))
        oy += int(rng.integers(-r.start_jitter, r.start_jitter + 1))
    length = shaft_length(spec.magnitude, r.shaft_min, r.shaft_max)
    dx, dy = math.cos(spec.angle), -math.sin(spec.angle)
    ex, ey = ox + round(length * dx), oy + round(length * dy)
    clipped = draw_line(mask, (ox, oy), (ex, ey), spec.width)
    head_len = max(4, 3 * spec.width)
    half = max(3, 2 * spec.width)
    tip = (ex + round(head_len * dx), ey + round(head_len * dy))
    left = (ex + round(-half * dy), ey + round(half * dx))
    right = (ex - round(-half * dy), ey - round(half * dx))
    clipped |= fill_triangle(mask, tip, left, right)
    clipped |= _outside([(ox, oy), (ex, ey), tip], _Dims(mask))
    record.update(origin=[ox, oy], end=[ex, ey], tip=list(tip), shaft_length=length,
                  angle=spec.angle, magnitude=spec.magnitude)
    return clipped


class _Dims:
    def __init__(self, mask):
        self.height, self.width = mask.shape


def _draw_label(mask, spec: BBox, size_range=(8, 14)):
    font = default_font()
    x, y, w, h = spec.rect
    above = y - 2
    room = max(above, mask.shape[0] - (y + h) - 2)
    if room < size_range[0]:
        return
    tokens = tokenize(spec.label)
    layout = layout_bbox(tokens, max(w, 1) * 2, room, size_range[0], size_range[1], font)
    if layout is None:
        return
    line_px = (font.line_height_units() * layout.size) // 1000 * len(layout.lines)
    top = y - 2 - line_px if above >= line_px else y + h + 2
    layout.box = (x, top, layout.box[2], layout.box[3])
    mask |= text_mask(layout, font, mask.shape[0], mask.shape[1])


def spec_from_json(obj: dict) -> MarkerSpec:
    kind = obj.get("type") or obj.get("kind")
    color = tuple(obj["color"]) if obj.get("color") is not None else None
    if kind == "arrow":
        return Arrow(tuple(obj["origin"]), float(obj["angle"]), float(obj["magnitude"]), color, obj.get("width"))
    if kind == "bbox":
        return BBox(tuple(obj["rect"]), color, obj.get("label", ""), obj.get("width"))
    if kind == "trajectory":
        return Trajectory([tuple(p) for p in obj["points"]], obj.get("thickness"), color)
    if kind == "doodle":
        return Doodle([[tuple(p) for p in s] for s in obj["strokes"]], color, obj.get("width"))
    raise MarkerError(f"unknown marker type {kind!r}")
