import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vispflow.render import (
    Arrow, BBox, BrokenFont, Canvas, CanvasError, Doodle, FixedMetricFont, MarkerError, MarkerRanges,
    TextConstraints, Trajectory, UnlayoutableError, choose_style, composite_over, from_ppm, layout_bbox,
    layout_with_fallback, luminance, render_marker, render_text_instruction, tokenize, validate_font,
)
from vispflow.render.glyphs import GlyphSource
from vispflow.render.layout import detokenize, try_word_wrap
from vispflow.render.text import BRIGHT_FILLS, DARK_FILLS

from layout_oracle import VaryingFont, oracle_best_size, oracle_fit, random_instance

FONT = FixedMetricFont()


# ---- tokenize ---------------------------------------------------------------

def _words(tokens):
    return [t.text for t in tokens if not t.is_separator]


def test_tokenize_words_and_separators():
    toks = tokenize("add a cat")
    assert _words(toks) == ["add", "a", "cat"]
    assert sum(t.is_separator for t in toks) == 2


def test_tokenize_alnum_run():
    assert _words(tokenize("abc123")) == ["abc123"]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_cjk_chars_are_single_tokens():
    toks = tokenize("画一只猫cat!")
    assert [(t.text, t.kind) for t in toks] == [
        ("画", "char"), ("一", "char"), ("只", "char"), ("猫", "char"), ("cat!", "word")]


@given(st.text(alphabet=st.sampled_from(list("ab1 -\n\t中猫é")), max_size=40))
def test_tokenize_round_trip(text):
    toks = tokenize(text)
    assert detokenize(toks) == text
    assert all(not any(c.isspace() for c in t.text) for t in toks if not t.is_separator)


# ---- font validation --------------------------------------------------------

class _Metric(GlyphSource):
    def __init__(self, area, covered="abc"):
        self._a, self._cov = area, set(covered)

    def covers(self, ch):
        return ch in self._cov

    def advance(self, ch):
        return 0.6

    def area(self, ch):
        return self._a


def test_validate_font_mean_ratio():
    assert validate_font(_Metric(0.5), "abc", 20, 0.05)


def test_validate_font_uncovered():
    assert not validate_font(_Metric(0.5), "abz", 20, 0.05)


def test_validate_font_degenerate_glyphs():
    assert not validate_font(_Metric(0.0), "abc", 20, 1e-12)
    assert not validate_font(BrokenFont(), "hello", 12, 0.05)


def test_validate_font_empty_text_is_vacuous():
    assert validate_font(_Metric(0.0), "", 10, 0.5)


def test_default_font_passes_and_reports_uncovered():
    assert validate_font(FONT, "make it red 画猫", 12, 0.05)
    assert not validate_font(FONT, "Ж", 12, 0.05)


# ---- layout -----------------------------------------------------------------

def test_layout_spec_example_width_bound():
    font = FixedMetricFont(advance=0.6, line_height=1.2)
    res = layout_bbox(tokenize("abcdefghij"), 120, 30, 8, 72, font)
    assert res.size == 20


def test_layout_hits_s_max_when_unconstrained():
    res = layout_bbox(tokenize("hi"), 500, 500, 8, 72, FONT)
    assert res.size == 72


def test_layout_absent_when_word_too_wide():
    assert layout_bbox(tokenize("a" * 40), 120, 30, 8, 8, FONT) is None
    assert layout_bbox(tokenize("a" * 40), 120, 300, 8, 72, FONT) is None


def test_layout_never_splits_words():
    toks = tokenize("alpha beta gamma delta")
    res = layout_bbox(toks, 60, 200, 4, 30, FONT)
    joined = [t.text for ln in res.lines for t in ln.tokens if not t.is_separator]
    assert joined == ["alpha", "beta", "gamma", "delta"]


def test_layout_matches_oracle_and_probe_budget():
    font = VaryingFont()
    rng = np.random.default_rng(123)
    for _ in range(500):
        text, w, h, lo, hi = random_instance(rng)
        probe = []
        res = layout_bbox(tokenize(text), w, h, lo, hi, font, probe=probe)
        expected = oracle_best_size(text, w, h, lo, hi, font)
        assert (res.size if res else None) == expected
        assert len(probe) <= math.ceil(math.log2(hi - lo + 1)) + 1
        if res is not None and res.size < hi:
            assert not oracle_fit(text, w, h, res.size + 1, font)


def test_layout_fallback_paths():
    toks = tokenize("a fairly long instruction text")
    small, full = (10, 10, 20, 10), (0, 0, 200, 200)
    direct = layout_with_fallback(toks, full, full, (4, 20), FONT)
    assert not direct.fallback
    assert direct.size == layout_bbox(toks, 200, 200, 4, 20, FONT).size
    assert layout_bbox(toks, 20, 10, 4, 20, FONT) is None
    res = layout_with_fallback(toks, small, full, (4, 20), FONT)
    assert res.fallback and res.box == full
    with pytest.raises(UnlayoutableError) as err:
        layout_with_fallback(tokenize("x supercalifragilistic"), small, (0, 0, 30, 30), (8, 20), FONT)
    assert err.value.token == "supercalifragilistic"


def test_wrap_lines_respect_width():
    lines = try_word_wrap(tokenize("one two three four five six"), 40, 8, FONT)
    for ln in lines:
        assert ln.units * 8 <= 40 * 1000


# ---- luminance / style / compositing -----------------------------------------

def test_luminance_examples():
    assert luminance(Canvas.blank(4, 4, (255, 255, 255))) == pytest.approx(255.0)
    assert luminance(Canvas.blank(4, 4, (0, 0, 0))) == 0.0
    c = Canvas.blank(4, 4, (100, 150, 200))
    assert luminance(c, (1, 1, 2, 2)) == pytest.approx(140.75, abs=1e-9)


def test_luminance_errors():
    with pytest.raises(CanvasError):
        luminance(Canvas.blank(4, 4), (0, 0, 0, 3))
    with pytest.raises(CanvasError):
        luminance(Canvas.blank(4, 4), (2, 2, 4, 4))


def test_choose_style_rule():
    bright_bg = choose_style(200, 24)
    assert bright_bg.fill in DARK_FILLS and bright_bg.stroke == (255, 255, 255)
    dark_bg = choose_style(50, 24)
    assert dark_bg.fill in BRIGHT_FILLS and dark_bg.stroke == (0, 0, 0)
    assert choose_style(128, 24).fill in BRIGHT_FILLS
    assert choose_style(128.0001, 24).fill in DARK_FILLS


def test_stroke_width_scales_with_line_height():
    assert choose_style(10, 6).stroke_width == 1
    assert choose_style(10, 24).stroke_width == 2
    assert choose_style(10, 30).stroke_width == 3  # 2.5 rounds half-up
    with pytest.raises(ValueError):
        choose_style(300, 10)


def _rgba(color, alpha, size=(3, 3)):
    px = np.zeros(size + (4,), dtype=np.uint8)
    px[...] = (*color, alpha)
    return Canvas(px)


def test_composite_transparent_and_opaque():
    dst = Canvas(np.random.default_rng(0).integers(0, 256, (3, 3, 4)).astype(np.uint8))
    dst.pixels[..., 3] = 255
    assert composite_over(dst, _rgba((9, 9, 9), 0)) == dst
    assert np.array_equal(composite_over(dst, _rgba((10, 20, 30), 255)).rgb, np.full((3, 3, 3), [10, 20, 30]))


def test_composite_half_red_over_black():
    out = composite_over(Canvas.blank(3, 3, (0, 0, 0)), _rgba((255, 0, 0), 128))
    assert out.pixels[0, 0].tolist() == [128, 0, 0, 255]


def test_composite_rounds_to_nearest():
    # an exact .5 cannot arise over a 255 denominator, so half-up reduces to nearest
    out = composite_over(Canvas.blank(1, 1, (0, 0, 0)), _rgba((1, 3, 0), 255 // 2 + 1, (1, 1)))
    # 1*128/255 = 0.50196 -> 1 ; 3*128/255 = 1.5059 -> 2
    assert out.pixels[0, 0, :3].tolist() == [1, 2, 0]
    assert composite_over(Canvas.blank(1, 1, (1, 1, 1)), _rgba((0, 0, 0), 0, (1, 1))).rgb.tolist() == [[[1, 1, 1]]]


def test_composite_opaque_top_replaces_content():
    rng = np.random.default_rng(1)
    base = Canvas.blank(5, 5, (1, 2, 3))
    mid = Canvas(rng.integers(0, 256, (5, 5, 4)).astype(np.uint8))
    top = _rgba((50, 60, 70), 255, (5, 5))
    assert composite_over(composite_over(base, mid), top) == composite_over(base, top)


def test_composite_size_mismatch():
    with pytest.raises(CanvasError):
        composite_over(Canvas.blank(3, 3), Canvas.blank(4, 3))


def test_ppm_round_trip_drops_alpha():
    rng = np.random.default_rng(2)
    c = Canvas.from_rgb(rng.integers(0, 256, (5, 7, 3)).astype(np.uint8))
    back = from_ppm(c.to_ppm())
    assert back == c
    assert c.to_ppm().startswith(b"P6\n7 5\n255\n")
    with pytest.raises(CanvasError):
        from_ppm(c.to_ppm()[:-1])


# ---- text rendering ----------------------------------------------------------

def test_render_text_deterministic():
    base = Canvas.blank(64, 64)
    a, pa = render_text_instruction(base, "paint it red", np.random.default_rng(7))
    b, pb = render_text_instruction(base, "paint it red", np.random.default_rng(7))
    assert a.pixels.tobytes() == b.pixels.tobytes()
    assert pa == pb


def test_render_text_on_white_is_dark():
    _, p = render_text_instruction(Canvas.blank(64, 64), "hello", np.random.default_rng(0))
    assert p.luminance > 128
    assert p.style.fill in DARK_FILLS


def test_render_text_on_black_is_bright():
    _, p = render_text_instruction(Canvas.blank(64, 64, (0, 0, 0)), "hello", np.random.default_rng(0))
    assert p.style.fill in BRIGHT_FILLS


def test_render_text_placement_inside_canvas_many_seeds():
    base = Canvas.blank(64, 48, (90, 140, 200))
    words = ["red", "make it blue", "画一只猫", "add a small yellow star", "x"]
    constraints = TextConstraints(s_min_range=(6, 9))
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        text = words[seed % len(words)]
        out, p = render_text_instruction(base, text, rng, constraints)
        x, y, w, h = p.box
        assert 0 <= x and 0 <= y and x + w <= 64 and y + h <= 48
        changed = np.any(out.pixels != base.pixels, axis=-1)
        ys, xs = np.nonzero(changed)
        if len(xs):
            assert xs.min() >= x and xs.max() < x + w and ys.min() >= y and ys.max() < y + h


def test_render_text_uses_requested_constraints():
    c = TextConstraints(s_min_range=(10, 10), s_max_range=(10, 10))
    _, p = render_text_instruction(Canvas.blank(64, 64), "hi", np.random.default_rng(3), c)
    assert p.size == 10


def test_render_text_rejected_font_and_unlayoutable():
    from vispflow.render import FontRejected
    with pytest.raises(FontRejected):
        render_text_instruction(Canvas.blank(64, 64), "hi", np.random.default_rng(0),
                                TextConstraints(fonts=[BrokenFont()]))
    with pytest.raises(UnlayoutableError):
        render_text_instruction(Canvas.blank(16, 16), "extraordinarily", np.random.default_rng(0))


# ---- markers ----------------------------------------------------------------

@pytest.mark.parametrize("m,expected", [(0.0, 20), (1.0, 100), (0.5, 60)])
def test_arrow_shaft_length(m, expected):
    canvas = Canvas.blank(256, 256)
    res = render_marker(canvas, Arrow((10, 128), 0.0, m, (255, 0, 0), 1), np.random.default_rng(0),
                        MarkerRanges(shaft_min=20, shaft_max=100))
    assert res.record["shaft_length"] == expected
    assert res.record["end"] == [10 + expected, 128]
    row = np.all(res.canvas.rgb[128] == [255, 0, 0], axis=-1)
    # shaft covers origin..end on its row; head continues past it
    assert row[10:10 + expected + 1].all()
    assert not res.clipped


def test_arrow_angle_points_up():
    res = render_marker(Canvas.blank(128, 128), Arrow((64, 100), math.pi / 2, 0.5, (0, 0, 255), 1),
                        np.random.default_rng(0), MarkerRanges(20, 60))
    assert res.record["end"] == [64, 60]


def test_arrow_magnitude_out_of_range():
    with pytest.raises(MarkerError):
        render_marker(Canvas.blank(16, 16), Arrow((1, 1), 0.0, 1.5), np.random.default_rng(0))


def test_marker_clipping_is_flagged():
    res = render_marker(Canvas.blank(64, 64), Arrow((50, 30), 0.0, 1.0, (255, 0, 0), 2),
                        np.random.default_rng(0))
    assert res.clipped
    assert res.canvas.pixels.shape == (64, 64, 4)


def test_bbox_marker_edges_and_label():
    res = render_marker(Canvas.blank(64, 64), BBox((10, 20, 30, 20), (255, 0, 0), "cat", 1),
                        np.random.default_rng(0))
    red = np.all(res.canvas.rgb == [255, 0, 0], axis=-1)
    assert red[20, 10:40].all() and red[39, 10:40].all()
    assert red[20:40, 10].all() and red[20:40, 39].all()
    assert not red[25:35, 15:35].any()
    assert red[:18].any()  # label drawn above the box
    assert not res.clipped


def test_trajectory_and_doodle():
    rng = np.random.default_rng(0)
    t = render_marker(Canvas.blank(32, 32), Trajectory([(2, 2), (20, 2), (20, 20)], 1, (0, 0, 0)), rng)
    black = np.all(t.canvas.rgb == 0, axis=-1)
    assert black[2, 2:21].all() and black[2:21, 20].all()
    d = render_marker(Canvas.blank(32, 32), Doodle([[(1, 1), (5, 5)], [(10, 10)]], (0, 0, 0), 1), rng)
    assert np.all(d.canvas.rgb[10, 10] == 0)
    with pytest.raises(MarkerError):
        render_marker(Canvas.blank(8, 8), Trajectory([]), rng)


def test_marker_random_attributes_within_ranges_and_deterministic():
    ranges = MarkerRanges(width_range=(2, 5))
    for seed in range(50):
        a = render_marker(Canvas.blank(64, 64), Arrow((5, 32), 0.3, 0.2), np.random.default_rng(seed), ranges)
        b = render_marker(Canvas.blank(64, 64), Arrow((5, 32), 0.3, 0.2), np.random.default_rng(seed), ranges)
        assert 2 <= a.record["width"] <= 5
        assert tuple(a.record["color"]) in ranges.colors
        assert a.canvas == b.canvas
