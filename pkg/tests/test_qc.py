import itertools
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vispflow import qc
from vispflow.render import Canvas


@lru_cache(maxsize=None)
def edit_distance_oracle(a, b):
    # textbook recursion on suffixes, independent of the row-DP in qc
    if not a:
        return len(b)
    if not b:
        return len(a)
    if a[0] == b[0]:
        return edit_distance_oracle(a[1:], b[1:])
    return 1 + min(edit_distance_oracle(a[1:], b), edit_distance_oracle(a, b[1:]),
                   edit_distance_oracle(a[1:], b[1:]))


@pytest.mark.parametrize("src,hyp,expected", [
    ("cat", "cat", 0.0),
    ("abc", "axc", 1 / 3),
    ("ab", "abc", 0.5),
    ("abc", "", 1.0),
    ("a", "bcd", 3.0),
])
def test_cer_examples(src, hyp, expected):
    assert qc.cer(src, hyp) == pytest.approx(expected, abs=1e-15)


def test_cer_empty_source_errors():
    with pytest.raises(ValueError):
        qc.cer("", "x")


def test_cer_matches_oracle_short_strings():
    strings = ["".join(p) for n in range(5) for p in itertools.product("abc", repeat=n)]
    for a in strings[1:]:
        for b in strings:
            assert qc.cer(a, b) * len(a) == edit_distance_oracle(a, b)


@given(st.text(alphabet="abc", min_size=1, max_size=12), st.text(alphabet="abc", max_size=12))
def test_cer_scaled_is_symmetric_levenshtein(a, b):
    d = round(qc.cer(a, b) * len(a))
    assert d == edit_distance_oracle(a, b) == edit_distance_oracle(b, a)
    assert qc.cer(a, a) == 0


def test_diversity_filter_examples():
    assert qc.diversity_filter([np.array([1.0, 0]), np.array([1.0, 0]), np.array([0, 1.0])], None, 0.9) == [0, 2]
    assert qc.diversity_filter(list(np.eye(5)), None, 0.5) == [0, 1, 2, 3, 4]
    near = [np.array([1.0, 0.0]), np.array([0.999, 0.0447])]
    assert qc.diversity_filter(near, None, 1.0) == [0, 1]


def test_diversity_filter_bad_tau():
    with pytest.raises(ValueError):
        qc.diversity_filter([np.ones(2)], None, 0.0)


def test_diversity_filter_pairwise_property():
    rng = np.random.default_rng(0)
    for _ in range(100):
        vecs = rng.normal(size=(int(rng.integers(1, 25)), 3))
        tau = float(rng.uniform(0.2, 1.0))
        kept = qc.diversity_filter(list(vecs), None, tau)
        unit = vecs / np.linalg.norm(vecs, axis=1, keepdims=True)
        for i, j in itertools.combinations(kept, 2):
            assert unit[i] @ unit[j] < tau
        # every dropped candidate collides with something kept before it
        for d in set(range(len(vecs))) - set(kept):
            assert max(unit[d] @ unit[k] for k in kept if k < d) >= tau


def test_diversity_filter_with_image_embedder():
    a = Canvas.blank(16, 16, (200, 10, 10))
    b = Canvas.blank(16, 16, (10, 10, 200))
    assert qc.diversity_filter([a, a.copy(), b], qc.GridEmbedder(), 0.95) == [0, 2]


@pytest.mark.parametrize("py,pn,expected", [(0.5, 0.5, 0.0), (0.8, 0.2, 3.0), (0.2, 0.8, -0.75)])
def test_logit_score_examples(py, pn, expected):
    assert qc.logit_score(py, pn) == pytest.approx(expected, abs=1e-15)


def test_logit_score_undefined():
    with pytest.raises(ValueError):
        qc.logit_score(0.5, 0.0)


# P(yes) is 0 or at least 1e-9: smaller values make (py - pn)/pn round to exactly -1
@given(st.just(0.0) | st.floats(1e-9, 1), st.floats(0.01, 1), st.floats(1e-6, 0.5))
def test_logit_score_monotone(py, pn, d):
    assert qc.logit_score(py + d, pn) > qc.logit_score(py, pn)
    # at P(yes) = 0 the score is -1 for every P(no), so only strict for P(yes) > 0
    if py > 0:
        assert qc.logit_score(py, pn + d) < qc.logit_score(py, pn)
    else:
        assert qc.logit_score(py, pn + d) == -1.0


def test_grid_embedder_unit_norm_and_deterministic():
    emb = qc.GridEmbedder()
    rng = np.random.default_rng(1)
    for _ in range(20):
        c = Canvas.from_rgb(rng.integers(0, 256, (32, 24, 3)).astype(np.uint8))
        v = emb(c)
        assert v.shape == (48,)
        assert abs(np.linalg.norm(v) - 1) < 1e-9
        assert np.array_equal(v, emb(c))
    assert abs(np.linalg.norm(emb(Canvas.blank(8, 8, (0, 0, 0)))) - 1) < 1e-9


def test_dense_embedder_shape():
    feats = qc.DenseEmbedder()(Canvas.blank(64, 64, (10, 20, 30)))
    assert feats.shape == (64, 12)
    assert np.allclose(feats[:, :3], np.array([10, 20, 30]) / 255)


def test_text_embedder():
    emb = qc.HashedTextEmbedder()
    assert abs(np.linalg.norm(emb("a red cat")) - 1) < 1e-12
    assert qc.cosine(emb("a red cat"), emb("a red cat")) == pytest.approx(1.0)
    assert qc.cosine(emb("a red cat"), emb("a blue dog")) < 0.9
