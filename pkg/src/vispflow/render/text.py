from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .canvas import Canvas, composite_over, luminance
from .glyphs import UNITS_PER_EM, GlyphSource, default_font
from .layout import LayoutResult, UnlayoutableError, layout_with_fallback, tokenize, validate_font
from .raster import dilate, paint

DARK_FILLS = [(0, 0, 0), (25, 25, 112), (96, 0, 0), (0, 64, 0), (48, 48, 48)]
BRIGHT_FILLS = [(255, 255, 255), (255, 236, 80), (180, 255, 255), (255, 200, 220)]
WHITE = (255, 255, 255)
BLACK = (0, 0, 0)


@dataclass(frozen=True)
class Style:
    fill: tuple
    stroke: tuple
    stroke_width: int


def choose_style(lum: float, line_height: float, rng=None) -> Style:
    """Dark fill with white stroke on bright backgrounds (L > 128), the converse otherwise."""
    if not 0.0 <= lum <= 255.0:
        raise ValueError(f"luminance {lum} outside [0, 255]")
    width = max(1, math.floor(line_height / 12 + 0.5))
    if lum > 128:
        fills, stroke = DARK_FILLS, WHITE
    else:
        fills, stroke = BRIGHT_FILLS, BLACK
    fill = fills[0] if rng is None else fills[int(rng.integers(len(fills)))]
    return Style(fill, stroke, width)


class FontRejected(ValueError):
    pass


@dataclass
class TextConstraints:
    """Randomization ranges for one text placement (all inclusive)."""

    s_min_range: tuple = (8, 12)
    s_max_range: tuple = (16, 40)
    box_frac_range: tuple = (0.3, 1.0)
    margin: int = 2
    glyph_threshold: float = 0.05
    fonts: list = field(default_factory=list)

    def font_pool(self):
        return self.fonts or [default_font()]


@dataclass
class Placement:
    box: tuple          # drawn pixel bounds (x, y, w, h), always inside the canvas
    layout_box: tuple   # box the layout was fitted into
    size: int
    fallback: bool
    font: str
    style: Style
    luminance: float
    lines: list

    def to_json(self):
        return {
            "box": list(self.box), "layout_box": list(self.layout_box), "size": self.size,
            "fallback": self.fallback, "font": self.font, "fill": list(self.style.fill),
            "stroke": list(self.style.stroke), "stroke_width": self.style.stroke_width,
            "luminance": self.luminance, "lines": self.lines,
        }


def text_mask(layout: LayoutResult, glyphs: GlyphSource, height: int, width: int) -> np.ndarray:
    mask = np.zeros((height, width), dtype=bool)
    size = layout.size
    line_px = (glyphs.line_height_units() * size) // UNITS_PER_EM
    top_pad = max(0, (line_px - size) // 2)
    for line, (x0, y0) in zip(layout.lines, layout.origins):
        units = 0
        for tok in line.tokens:
            for ch in tok.text:
                gx = x0 + (units * size) // UNITS_PER_EM
                units += glyphs.advance_units(ch)
                if ch.isspace():
                    continue
                bmp = glyphs.bitmap(ch, size)
                gy = y0 + top_pad
                _blit(mask, bmp, gx, gy)
    return mask


def _blit(mask, bmp, x, y):
    h, w = mask.shape
    bh, bw = bmp.shape
    xa, ya = max(x, 0), max(y, 0)
    xb, yb = min(x + bw, w), min(y + bh, h)
    if xa < xb and ya < yb:
        mask[ya:yb, xa:xb] |= bmp[ya - y:yb - y, xa - x:xb - x]


def _sample_box(rng, canvas, c: TextConstraints):
    m = c.margin
    avail_w, avail_h = canvas.width - 2 * m, canvas.height - 2 * m
    if avail_w < 1 or avail_h < 1:
        raise ValueError("canvas too small for the configured margin")
    lo, hi = c.box_frac_range
    bw = int(rng.integers(max(1, math.ceil(lo * avail_w)), max(1, math.floor(hi * avail_w)) + 1))
    bh = int(rng.integers(max(1, math.ceil(lo * avail_h)), max(1, math.floor(hi * avail_h)) + 1))
    x = m + int(rng.integers(0, avail_w - bw + 1))
    y = m + int(rng.integers(0, avail_h - bh + 1))
    return (x, y, bw, bh), (m, m, avail_w, avail_h)


def render_text_instruction(canvas: Canvas, text: str, rng, constraints: TextConstraints = None):
    """Lay out ``text`` at a random box and size, stylize against the background, composite.

    Returns ``(new_canvas, placement)``. Raises UnlayoutableError when the text
    fits neither the sampled box nor the full safe margins.
    """
    c = constraints or TextConstraints()
    fonts = list(c.font_pool())
    order = rng.permutation(len(fonts))
    s_min = int(rng.integers(c.s_min_range[0], c.s_min_range[1] + 1))
    s_max = int(rng.integers(max(s_min, c.s_max_range[0]), max(s_min, c.s_max_range[1]) + 1))
    glyphs = next((fonts[i] for i in order if validate_font(fonts[i], text, s_min, c.glyph_threshold)), None)
    if glyphs is None:
        raise FontRejected(f"no configured font can render {text!r}")
    box, margins = _sample_box(rng, canvas, c)
    fill_rng_draw = int(rng.integers(1 << 30))
    layout = layout_with_fallback(tokenize(text), box, margins, (s_min, s_max), glyphs)

    fill = text_mask(layout, glyphs, canvas.height, canvas.width)
    line_px = glyphs.line_height * layout.size
    ys, xs = np.nonzero(fill)
    if len(xs):
        region = (int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))
    else:
        region = (layout.box[0], layout.box[1], 1, 1)
    lum = luminance(canvas, region)
    style = choose_style(lum, line_px, np.random.default_rng(fill_rng_draw))
    outline = dilate(fill, style.stroke_width) & ~fill

    layer = np.zeros_like(canvas.pixels)
    paint(layer, outline, style.stroke)
    paint(layer, fill, style.fill)
    out = composite_over(canvas, Canvas(layer))

    drawn = fill | outline
    ys, xs = np.nonzero(drawn)
    bounds = ((int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))
              if len(xs) else (region[0], region[1], 0, 0))
    lines = ["".join(t.text for t in ln.tokens) for ln in layout.lines]
    return out, Placement(bounds, tuple(layout.box), layout.size, layout.fallback, glyphs.name,
                          style, lum, lines)


__all__ = [
    "FontRejected", "Placement", "Style", "TextConstraints", "UnlayoutableError", "choose_style",
    "render_text_instruction", "text_mask",
]
