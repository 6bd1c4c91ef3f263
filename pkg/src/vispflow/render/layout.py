"""Tokenization and bounding-box text layout with binary search over font size.

Widths and heights are compared in integer milli-em units so the fit test is
exact and identical on every platform.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .glyphs import UNITS_PER_EM, GlyphSource

WORD, CHAR, SPACE, NEWLINE = "word", "char", "space", "newline"


@dataclass(frozen=True)
class Token:
    text: str
    kind: str

    @property
    def is_separator(self):
        return self.kind in (SPACE, NEWLINE)


def _is_latin(ch: str) -> bool:
    code = ord(ch)
    # printable ASCII (letters, digits, symbols) and the Latin-1/Extended letter blocks
    return (0x21 <= code <= 0x7E) or (0xC0 <= code <= 0x24F and code not in (0xD7, 0xF7))


def tokenize(text: str) -> list[Token]:
    """Split text into whole-word Latin runs, single non-Latin characters and separators."""
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            tokens.append(Token(ch, NEWLINE))
            i += 1
        elif ch.isspace():
            j = i
            while j < n and text[j].isspace() and text[j] != "\n":
                j += 1
            tokens.append(Token(text[i:j], SPACE))
            i = j
        elif _is_latin(ch):
            j = i
            while j < n and _is_latin(text[j]):
                j += 1
            tokens.append(Token(text[i:j], WORD))
            i = j
        else:
            tokens.append(Token(ch, CHAR))
            i += 1
    return tokens


def detokenize(tokens) -> str:
    return "".join(t.text for t in tokens)


def validate_font(glyphs: GlyphSource, text: str, size: float, threshold: float = 0.05) -> bool:
    """Coverage check plus mean glyph-box area ratio ``A_c(s) / s**2`` above ``threshold``."""
    if size <= 0:
        raise ValueError("font size must be positive")
    if not text:
        return True
    if not all(glyphs.covers(ch) for ch in text):
        return False
    ratios = [glyphs.area(ch) * size * size / (size * size) for ch in text]
    return sum(ratios) / len(ratios) > threshold


@dataclass
class Line:
    tokens: list
    units: int  # width at unit size, milli-em


@dataclass
class LayoutResult:
    size: int
    lines: list
    box: tuple  # (x, y, w, h) the text was fitted into
    line_height: float
    fallback: bool = False

    @property
    def line_widths(self):
        return [ln.units * self.size / UNITS_PER_EM for ln in self.lines]

    @property
    def origins(self):
        x, y = self.box[0], self.box[1]
        lh_units = round(self.line_height * UNITS_PER_EM)
        return [(x, y + (i * lh_units * self.size) // UNITS_PER_EM) for i in range(len(self.lines))]

    @property
    def text_width(self):
        return max(self.line_widths, default=0.0)

    @property
    def text_height(self):
        return len(self.lines) * self.line_height * self.size


def _token_units(tok: Token, glyphs: GlyphSource) -> int:
    return sum(glyphs.advance_units(ch) for ch in tok.text)


def try_word_wrap(tokens, width, size, glyphs) -> Optional[list]:
    """Greedy wrap at ``size``; None when some token alone is wider than ``width``."""
    limit = width * UNITS_PER_EM
    lines: list[Line] = []
    cur: list[Token] = []
    cur_units = 0
    pending = None
    for tok in tokens:
        if tok.kind == NEWLINE:
            lines.append(Line(cur, cur_units))
            cur, cur_units, pending = [], 0, None
            continue
        if tok.kind == SPACE:
            if cur:
                pending = tok
            continue
        units = _token_units(tok, glyphs)
        if units * size > limit:
            return None
        if not cur:
            cur, cur_units = [tok], units
        else:
            sep_units = _token_units(pending, glyphs) if pending else 0
            if (cur_units + sep_units + units) * size <= limit:
                if pending:
                    cur.append(pending)
                cur.append(tok)
                cur_units += sep_units + units
            else:
                lines.append(Line(cur, cur_units))
                cur, cur_units = [tok], units
        pending = None
    if cur:
        lines.append(Line(cur, cur_units))
    return lines


def fits_height(lines, height, size, glyphs) -> bool:
    return len(lines) * glyphs.line_height_units() * size <= height * UNITS_PER_EM


def layout_bbox(tokens, width, height, s_min: int, s_max: int, glyphs: GlyphSource,
                probe: Optional[list] = None) -> Optional[LayoutResult]:
    """Largest integer size in ``[s_min, s_max]`` whose greedy wrap fits ``width x height``.

    ``probe``, when given, collects every size at which a wrap was evaluated.
    """
    if width <= 0 or height <= 0:
        raise ValueError("box dimensions must be positive")
    if s_min > s_max:
        raise ValueError("s_min must not exceed s_max")
    low, high = int(s_min), int(s_max)
    best = None
    while low <= high:
        mid = (low + high) // 2
        if probe is not None:
            probe.append(mid)
        lines = try_word_wrap(tokens, width, mid, glyphs)
        if lines is not None and fits_height(lines, height, mid, glyphs):
            best = (mid, lines)
            low = mid + 1
        else:
            high = mid - 1
    if best is None:
        return None
    return LayoutResult(best[0], best[1], (0, 0, width, height), glyphs.line_height)


class UnlayoutableError(ValueError):
    def __init__(self, token, message=None):
        self.token = token
        super().__init__(message or f"text cannot be laid out; failing token {token!r}")


def layout_with_fallback(tokens, box, margins, sizes, glyphs: GlyphSource) -> LayoutResult:
    """Fit into ``box``; if nothing fits, retry once in the full ``margins`` box.

    Both boxes are ``(x, y, w, h)`` in canvas pixels; ``sizes`` is ``(s_min, s_max)``.
    """
    s_min, s_max = sizes
    for rect, is_fallback in ((box, False), (margins, True)):
        x, y, w, h = rect
        result = layout_bbox(tokens, w, h, s_min, s_max, glyphs)
        if result is not None:
            result.box = (x, y, w, h)
            result.fallback = is_fallback
            return result
    content = [t for t in tokens if not t.is_separator]
    worst = max(content, key=lambda t: _token_units(t, glyphs), default=None)
    raise UnlayoutableError(worst.text if worst else "")

