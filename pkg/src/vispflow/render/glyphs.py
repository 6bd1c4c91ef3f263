"""Glyph metric sources and the built-in fixed-metric bitmap font."""
from __future__ import annotations

import numpy as np

UNITS_PER_EM = 1000

# A handful of common CJK code points so mixed-script layouts can be exercised.
CJK_SAMPLE = "的一是不了人我在有这中大来上个到说们为子和你地出也时年红绿蓝黄白黑色猫狗加画添只把变成"


class UncoveredGlyph(KeyError):
    pass


class GlyphSource:
    """Metric interface used by layout; subclasses supply per-code-point values.

    ``advance`` and ``area`` are at unit font size (1 px/em), ``line_height`` is
    a multiple of the font size.
    """

    name = "abstract"
    line_height = 1.2

    def covers(self, ch: str) -> bool:
        raise NotImplementedError

    def advance(self, ch: str) -> float:
        raise NotImplementedError

    def area(self, ch: str) -> float:
        raise NotImplementedError

    def bitmap(self, ch: str, size: int) -> np.ndarray:
        raise NotImplementedError

    def advance_units(self, ch: str) -> int:
        return round(self.advance(ch) * UNITS_PER_EM)

    def line_height_units(self) -> int:
        return round(self.line_height * UNITS_PER_EM)

    def _check(self, ch):
        if not self.covers(ch):
            raise UncoveredGlyph(f"{self.name} has no glyph for U+{ord(ch):04X}")


class FixedMetricFont(GlyphSource):
    """Every glyph is 0.6 em wide with a 0.45 em² box; lines are 1.2 em.

    ASCII shapes come from Pillow's built-in 6x11 bitmap font. CJK sample glyphs
    are synthetic block patterns derived from the code point; they are
    placeholders that keep distinct characters visually distinct.
    """

    name = "fixed-bitmap"

    def __init__(self, advance=0.6, area=0.45, line_height=1.2, extra_coverage=CJK_SAMPLE):
        self._advance = advance
        self._area = area
        self.line_height = line_height
        self._ascii = _pillow_ascii_bitmaps()
        self._extra = set(extra_coverage)
        self._cache: dict[tuple[str, int], np.ndarray] = {}

    def covers(self, ch):
        return ch in self._ascii or ch in self._extra or ch in " \t\n"

    def advance(self, ch):
        self._check(ch)
        return self._advance

    def area(self, ch):
        self._check(ch)
        return self._area

    def cell_width(self, size: int) -> int:
        # round-half-up of advance * size in integer units
        return (self.advance_units("a") * size + UNITS_PER_EM // 2) // UNITS_PER_EM

    def bitmap(self, ch, size):
        """Boolean glyph mask of shape (size, cell_width) scaled nearest-neighbour."""
        self._check(ch)
        key = (ch, size)
        if key not in self._cache:
            w = self.cell_width(size)
            if ch in " \t\n":
                src = np.zeros((11, 6), dtype=bool)
            elif ch in self._ascii:
                src = self._ascii[ch]
            else:
                src = _synthetic_glyph(ch)
            sh, sw = src.shape
            rows = (np.arange(size) * sh) // size
            cols = (np.arange(w) * sw) // max(w, 1)
            self._cache[key] = src[rows][:, cols]
        return self._cache[key]


class BrokenFont(FixedMetricFont):
    """A font whose glyph boxes are degenerate (area 0): the "tofu" failure mode."""

    name = "broken"

    def __init__(self):
        super().__init__(area=0.0)


def _pillow_ascii_bitmaps():
    from PIL import Image, ImageDraw, ImageFont

    font = ImageFont.load_default_imagefont()
    out = {}
    for code in range(0x21, 0x7F):
        ch = chr(code)
        img = Image.new("L", (6, 11), 0)
        ImageDraw.Draw(img).text((0, 0), ch, font=font, fill=255)
        out[ch] = np.asarray(img) > 127
    return out


def _synthetic_glyph(ch):
    # 12x12 block pattern from an integer LCG seeded by the code point: stable across platforms
    state = ord(ch) * 2654435761 % (1 << 32)
    grid = np.zeros((12, 12), dtype=bool)
    grid[1, 1:11] = True
    for _ in range(4):
        state = (1103515245 * state + 12345) % (1 << 31)
        pos = 2 + state % 9
        if state & 1:
            grid[pos, 1:11] = True
        else:
            grid[1:11, pos] = True
    return grid


_default = None


def default_font() -> FixedMetricFont:
    global _default
    if _default is None:
        _default = FixedMetricFont()
    return _default
