from .canvas import Canvas, CanvasError, composite_over, from_ppm, load_ppm, luminance
from .glyphs import BrokenFont, FixedMetricFont, GlyphSource, UncoveredGlyph, default_font
from .layout import (
    LayoutResult, Token, UnlayoutableError, layout_bbox, layout_with_fallback, tokenize, try_word_wrap,
    validate_font,
)
from .markers import (
    Arrow, BBox, Doodle, MarkerError, MarkerRanges, MarkerResult, Trajectory, render_marker, shaft_length,
    spec_from_json,
)
from .text import FontRejected, Placement, Style, TextConstraints, choose_style, render_text_instruction
