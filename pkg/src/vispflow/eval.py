"""Benchmark scoring: directional similarities, the four-score pass rule and
per-category aggregation.

Rates are aggregated with exact rational arithmetic so that reported totals
round the true mean, never a binary approximation of it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import CATEGORIES

EPS = 1e-9
# column order of the published results table
TABLE_ORDER = ("C2I", "T2I", "TIE", "FU", "TBE", "TU", "VME", "DE")
SCORE_KEYS = ("fidelity", "consistency", "realism", "spatial")


class DegenerateEdit(ValueError):
    """A displacement vector too short to define a direction."""


class MissingCategory(ValueError):
    pass


def directional_similarity(a0, a1, b0, b1) -> float:
    """Cosine between displacements a1 - a0 and b1 - b0."""
    da = np.ravel(np.asarray(a1, dtype=np.float64) - np.asarray(a0, dtype=np.float64))
    db = np.ravel(np.asarray(b1, dtype=np.float64) - np.asarray(b0, dtype=np.float64))
    if da.shape != db.shape:
        raise ValueError(f"displacements differ in dimension: {da.shape} vs {db.shape}")
    na, nb = np.linalg.norm(da), np.linalg.norm(db)
    if na <= EPS:
        raise DegenerateEdit(f"first displacement has norm {na:.3g} <= {EPS}")
    if nb <= EPS:
        raise DegenerateEdit(f"second displacement has norm {nb:.3g} <= {EPS}")
    return float(np.clip(da @ db / (na * nb), -1.0, 1.0))


def dir_clip(src_caption, tgt_caption, in_img, gen_img, text_embedder, img_embedder) -> float:
    if not src_caption or not tgt_caption:
        raise ValueError("captions must be non-empty")
    return directional_similarity(text_embedder(src_caption), text_embedder(tgt_caption),
                                  img_embedder(in_img), img_embedder(gen_img))


def dinov3_dir_sim(in_img, gen_img, gt_img, dense_embedder) -> float:
    sizes = {(c.width, c.height) for c in (in_img, gen_img, gt_img)}
    if len(sizes) != 1:
        raise ValueError(f"images differ in size: {sorted(sizes)}")
    phi_in = dense_embedder(in_img)
    return directional_similarity(phi_in, dense_embedder(gen_img), phi_in, dense_embedder(gt_img))


@dataclass
class ScoreCard:
    fidelity: float
    consistency: float
    realism: float
    spatial: float
    category: str = ""
    id: str = ""

    @property
    def scores(self):
        return (self.fidelity, self.consistency, self.realism, self.spatial)

    @property
    def verdict(self) -> str:
        return verdict(*self.scores)


def verdict(fidelity, consistency, realism, spatial) -> str:
    """PASS iff fidelity >= 3, mean >= 3 and every score > 2 (a 2.0 fails)."""
    scores = (fidelity, consistency, realism, spatial)
    for name, s in zip(SCORE_KEYS, scores):
        if not (isinstance(s, (int, float)) and 1.0 <= s <= 5.0):
            raise ValueError(f"{name} score {s!r} outside [1, 5]")
    ok = fidelity >= 3.0 and math.fsum(scores) >= 12.0 and min(scores) > 2.0
    return "PASS" if ok else "FAIL"


def _exact(x) -> Fraction:
    # decimal literal of the float, so .890 means 890/1000
    return x if isinstance(x, Fraction) else Fraction(str(x)) if isinstance(x, float) else Fraction(x)


def round_half_away(x, places=3) -> str:
    """Decimal string of ``x`` rounded half away from zero."""
    q = _exact(x) * 10 ** places
    n = math.floor(abs(q) + Fraction(1, 2))
    whole, frac = divmod(n, 10 ** places)
    return f"{'-' if q < 0 and n else ''}{whole}.{frac:0{places}d}"


@dataclass
class BenchReport:
    rates: dict                       # category -> rate (float) or None when absent
    total: float
    mode: str = "mean"
    counts: dict = field(default_factory=dict)
    label: str = ""

    @property
    def total_3dp(self) -> str:
        return round_half_away(self._total_exact, 3)

    def __post_init__(self):
        self._total_exact = _exact(self.total)

    def to_dict(self):
        return {"label": self.label, "mode": self.mode, "total": self.total, "total_3dp": self.total_3dp,
                "rates": {c: self.rates.get(c) for c in TABLE_ORDER},
                "rates_3dp": {c: None if self.rates.get(c) is None else round_half_away(self.rates[c])
                              for c in TABLE_ORDER},
                "counts": {c: self.counts[c] for c in TABLE_ORDER if c in self.counts}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_table(self) -> str:
        head = ["Method"] + list(TABLE_ORDER) + ["Total"]
        cells = [self.label or "model"]
        for c in TABLE_ORDER:
            r = self.rates.get(c)
            cells.append("-" if r is None else round_half_away(r).lstrip("0") or "0")
        cells.append(self.total_3dp.lstrip("0"))
        widths = [max(len(h), len(v)) for h, v in zip(head, cells)]
        fmt = " | ".join(f"{{:<{widths[0]}}}" if i == 0 else f"{{:>{w}}}" for i, w in enumerate(widths))
        return "\n".join([fmt.format(*head), "-+-".join("-" * w for w in widths), fmt.format(*cells)])


def _check_category(c):
    if c not in CATEGORIES:
        raise ValueError(f"unknown category {c!r}")


def aggregate_rates(rates: dict, counts: dict = None, allow_missing=False, mode="mean", label="") -> BenchReport:
    """Total from per-category rates.

    ``mode="mean"`` is the unweighted category mean. ``mode="pooled"`` weights
    each category by its sample count (needs ``counts``), i.e. total passes over
    total samples.
    """
    for c in rates:
        _check_category(c)
    present = [c for c in CATEGORIES if rates.get(c) is not None]
    missing = [c for c in CATEGORIES if c not in present]
    if missing and not allow_missing:
        raise MissingCategory(f"no rate for {missing}; pass allow_missing to exclude them")
    if not present:
        raise MissingCategory("no category has a rate")
    if mode == "mean":
        total = sum(_exact(rates[c]) for c in present) / len(present)
    elif mode == "pooled":
        if not counts or any(c not in counts for c in present):
            raise ValueError("pooled aggregation needs a sample count for every present category")
        n = sum(counts[c] for c in present)
        total = sum(_exact(rates[c]) * counts[c] for c in present) / n
    else:
        raise ValueError(f"unknown aggregation mode {mode!r}")
    report = BenchReport({c: rates.get(c) for c in CATEGORIES}, float(total), mode, dict(counts or {}), label)
    report._total_exact = total
    return report


def aggregate(samples, allow_missing=False, mode="mean", label="") -> BenchReport:
    """``samples``: iterable of ScoreCards or ``(category, verdict)`` pairs."""
    passes, counts = {}, {}
    for s in samples:
        cat, v = (s.category, s.verdict) if isinstance(s, ScoreCard) else s
        _check_category(cat)
        if v not in ("PASS", "FAIL", True, False):
            raise ValueError(f"bad verdict {v!r}")
        counts[cat] = counts.get(cat, 0) + 1
        passes[cat] = passes.get(cat, 0) + (v in ("PASS", True))
    exact = {c: Fraction(passes[c], counts[c]) for c in counts}
    report = aggregate_rates(exact, counts, allow_missing, mode, label)
    report.rates = {c: (float(exact[c]) if c in exact else None) for c in CATEGORIES}
    return report


def load_scores(path) -> list:
    """Score file: JSON lines ``{id, category, fidelity, consistency, realism, spatial}``."""
    cards = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                card = ScoreCard(*(float(obj[k]) for k in SCORE_KEYS), category=obj["category"],
                                 id=str(obj.get("id", lineno)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad score record: {exc}") from exc
            _check_category(card.category)
            card.verdict  # validates the score range
            cards.append(card)
    return cards


def pair_metrics(pairs_dir, dense_embedder=None, image_embedder=None, text_embedder=None) -> dict:
    """Directional metrics over ``<id>.input.ppm`` / ``<id>.gen.ppm`` / ``<id>.gt.ppm`` files.

    An optional ``<id>.json`` with ``src_caption`` and ``tgt_caption`` enables the
    CLIP-style direction. Degenerate edits are listed, not scored as zero.
    """
    from .qc import DenseEmbedder, GridEmbedder, HashedTextEmbedder
    from .render import load_ppm

    dense_embedder = dense_embedder or DenseEmbedder()
    image_embedder = image_embedder or GridEmbedder()
    # CLIP puts captions and images in one space; the surrogates at least share a width
    text_embedder = text_embedder or HashedTextEmbedder(dim=image_embedder.dim)
    root = Path(pairs_dir)
    ids = sorted(p.name[:-len(".input.ppm")] for p in root.glob("*.input.ppm"))
    per, degenerate = {}, []
    for pid in ids:
        inp, gen = load_ppm(root / f"{pid}.input.ppm"), load_ppm(root / f"{pid}.gen.ppm")
        row = {}
        gt_path = root / f"{pid}.gt.ppm"
        try:
            if gt_path.exists():
                row["dinov3_dir_sim"] = dinov3_dir_sim(inp, gen, load_ppm(gt_path), dense_embedder)
            meta_path = root / f"{pid}.json"
            if meta_path.exists():
                meta = json.loads(meta_path.read_text(encoding="utf-8"))
                row["dir_clip"] = dir_clip(meta["src_caption"], meta["tgt_caption"], inp, gen,
                                           text_embedder, image_embedder)
        except DegenerateEdit as exc:
            degenerate.append({"id": pid, "reason": str(exc)})
            continue
        per[pid] = row
    means = {}
    for key in ("dinov3_dir_sim", "dir_clip"):
        vals = [r[key] for r in per.values() if key in r]
        means[key] = float(np.mean(vals)) if vals else None
    return {"pairs": per, "mean": means, "degenerate": degenerate, "count": len(ids)}
