"""Dataset quality control: OCR error rate, diversity deduplication, logit confidence.

The embedders here are deterministic, dependency-free surrogates for CLIP-style
global and DINO-style dense image features. They only need to be stable and
sensitive to colour and layout, not semantically meaningful.
"""
from __future__ import annotations

import zlib

import numpy as np

DEFAULT_TAU_OCR = 0.05
DEFAULT_TAU_DIV = 0.9
DEFAULT_SCORE_THRESHOLD = 1.0


def _pixels01(canvas):
    rgb = canvas.rgb if hasattr(canvas, "rgb") else np.asarray(canvas)[..., :3]
    return rgb.astype(np.float64) / 255.0


def _cells(n, parts):
    edges = (np.arange(parts + 1) * n) // parts
    return list(zip(edges[:-1], edges[1:]))


class GridEmbedder:
    """Mean RGB over a ``grid x grid`` layout, centred to [-1, 1], L2-normalised."""

    def __init__(self, grid=4):
        self.grid = grid
        self.dim = 3 * grid * grid

    def __call__(self, canvas) -> np.ndarray:
        px = _pixels01(canvas) * 2.0 - 1.0
        h, w = px.shape[:2]
        feats = [px[y0:y1, x0:x1].reshape(-1, 3).mean(axis=0)
                 for y0, y1 in _cells(h, self.grid) for x0, x1 in _cells(w, self.grid)]
        v = np.concatenate(feats)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            v = np.ones_like(v)
            norm = np.linalg.norm(v)
        return v / norm


class DenseEmbedder:
    """Per-patch features on a ``grid x grid`` patch grid: mean RGB plus a 3x3 grey thumbnail.

    Returns an array of shape (grid * grid, 12).
    """

    def __init__(self, grid=8):
        self.grid = grid
        self.patch_dim = 12

    def __call__(self, canvas) -> np.ndarray:
        px = _pixels01(canvas)
        gray = px @ np.array([0.299, 0.587, 0.114])
        h, w = px.shape[:2]
        out = []
        for y0, y1 in _cells(h, self.grid):
            for x0, x1 in _cells(w, self.grid):
                mean_rgb = px[y0:y1, x0:x1].reshape(-1, 3).mean(axis=0)
                patch = gray[y0:y1, x0:x1]
                ph, pw = patch.shape
                thumb = [patch[a:b, c:d].mean() if b > a and d > c else 0.0
                         for a, b in _cells(ph, 3) for c, d in _cells(pw, 3)]
                out.append(np.concatenate([mean_rgb, thumb]))
        return np.asarray(out)


class HashedTextEmbedder:
    """Bag of hashed character trigrams (with word boundaries), L2-normalised."""

    def __init__(self, dim=256):
        self.dim = dim

    def __call__(self, text: str) -> np.ndarray:
        v = np.zeros(self.dim)
        padded = f"  {text.lower()} "
        for i in range(len(padded) - 2):
            v[zlib.crc32(padded[i:i + 3].encode("utf-8")) % self.dim] += 1.0
        norm = np.linalg.norm(v)
        return v / norm if norm else v


def levenshtein(a, b) -> int:
    """Edit distance with unit-cost substitutions, deletions and insertions."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def cer(source: str, hypothesis: str) -> float:
    """(S + D + I) / N with N = len(source); can exceed 1."""
    if not source:
        raise ValueError("CER needs a non-empty source text")
    return levenshtein(source, hypothesis) / len(source)


def passes_ocr(source, hypothesis, tau_ocr=DEFAULT_TAU_OCR) -> bool:
    return cer(source, hypothesis) <= tau_ocr


def cosine(a, b) -> float:
    a, b = np.ravel(a), np.ravel(b)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def diversity_filter(candidates, embedder=None, tau_div=DEFAULT_TAU_DIV) -> list[int]:
    """Greedy pass in input order: keep a candidate iff its max cosine to everything
    kept so far is strictly below ``tau_div``. ``embedder=None`` means the
    candidates are already vectors."""
    if not 0.0 < tau_div <= 1.0:
        raise ValueError("tau_div must lie in (0, 1]")
    kept: list[int] = []
    pool = []
    for i, cand in enumerate(candidates):
        v = np.ravel(embedder(cand) if embedder is not None else cand).astype(np.float64)
        n = np.linalg.norm(v)
        v = v / n if n else v
        if pool and max(float(p @ v) for p in pool) >= tau_div:
            continue
        kept.append(i)
        pool.append(v)
    return kept


def logit_score(p_yes: float, p_no: float) -> float:
    """Relative margin of yes over no: (P(yes) - P(no)) / P(no)."""
    if p_yes < 0 or p_no < 0:
        raise ValueError("probabilities must be non-negative")
    if p_no == 0:
        raise ValueError("score undefined for P(no) = 0")
    return (p_yes - p_no) / p_no


def retain(p_yes, p_no, threshold=DEFAULT_SCORE_THRESHOLD) -> bool:
    return logit_score(p_yes, p_no) >= threshold
