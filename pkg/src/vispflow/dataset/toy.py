"""Two-category toy task: a rendered colour word maps to a solid canvas of that colour.

T2I pairs put the word on a white canvas. TIE pairs put it on a solid canvas of a
different colour, so the source image is present but must be replaced.
"""
from __future__ import annotations

import numpy as np

from ..render import Canvas, TextConstraints, render_text_instruction
from .records import PairRecord

PALETTE = {
    "red": (220, 40, 40),
    "green": (40, 170, 60),
    "blue": (40, 70, 210),
    "yellow": (235, 210, 40),
    "cyan": (40, 200, 210),
    "magenta": (200, 50, 190),
    "orange": (240, 140, 30),
    "purple": (120, 50, 170),
}


def toy_constraints(side: int) -> TextConstraints:
    # sizes shrink below 64 px so the longest word still fits one line
    lo = min(8, max(3, side // 8))
    return TextConstraints(s_min_range=(lo, lo + 2), s_max_range=(max(lo + 2, min(14, side // 3)), max(14, side // 3)))


def make_toy_pair(i: int, rng, side=64, categories=("T2I", "TIE")) -> PairRecord:
    names = list(PALETTE)
    category = categories[i % len(categories)]
    word = names[int(rng.integers(len(names)))]
    if category == "TIE":
        others = [n for n in names if n != word]
        src_name = others[int(rng.integers(len(others)))]
        base = Canvas.blank(side, side, PALETTE[src_name])
        extra = {"source_color": src_name}
    else:
        base = Canvas.blank(side, side, (255, 255, 255))
        extra = {}
    canvas, placement = render_text_instruction(base, word, rng, toy_constraints(side))
    target = Canvas.blank(side, side, PALETTE[word])
    return PairRecord(canvas, target, category, word, [{"text": placement.to_json()}],
                      root_id=f"toy-{i:06d}", extra={"color": word, **extra})


def make_toy_dataset(n: int, seed: int = 0, side: int = 64, categories=("T2I", "TIE")) -> list:
    """``n`` pairs alternating over ``categories``; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    return [make_toy_pair(i, rng, side, categories) for i in range(n)]
