from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

DEFAULT_TAU_SPLIT = 0.92


@dataclass
class SplitManifest:
    train_roots: list
    bench_roots: list
    tau_split: float
    dropped: int
    train_records: list = field(default_factory=list)   # record indices kept for training
    bench_records: list = field(default_factory=list)
    dropped_records: list = field(default_factory=list)
    max_train_bench_similarity: float | None = None
    embedding_source: str = "input_canvas"
    seed: int = 0

    def __post_init__(self):
        if set(self.train_roots) & set(self.bench_roots):
            raise ValueError("train and bench root ids overlap")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SplitManifest":
        return cls(**json.loads(text))


def _unit_rows(vectors):
    m = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return m / np.where(norms == 0, 1.0, norms)


def split_by_root(records, embedder, tau_split=DEFAULT_TAU_SPLIT, bench_fraction=0.1, seed=0) -> SplitManifest:
    """Assign whole root ids to train or bench, then drop train records whose input
    canvas is more similar than ``tau_split`` to any bench input canvas."""
    records = list(records)
    for i, r in enumerate(records):
        if not r.root_id:
            raise ValueError(f"record {i} has no root id")
    roots = sorted({r.root_id for r in records})
    order = np.random.default_rng(seed).permutation(len(roots))
    n_bench = min(len(roots), int(round(bench_fraction * len(roots))))
    bench_roots = sorted(roots[i] for i in order[:n_bench])
    bench_set = set(bench_roots)
    train_roots = [r for r in roots if r not in bench_set]

    bench_idx = [i for i, r in enumerate(records) if r.root_id in bench_set]
    train_idx = [i for i, r in enumerate(records) if r.root_id not in bench_set]
    kept, dropped, worst = list(train_idx), [], None
    if bench_idx and train_idx:
        bench_emb = _unit_rows([embedder(records[i].input) for i in bench_idx])
        train_emb = _unit_rows([embedder(records[i].input) for i in train_idx])
        sims = (train_emb @ bench_emb.T).max(axis=1)
        kept = [i for i, s in zip(train_idx, sims) if s <= tau_split]
        dropped = [i for i, s in zip(train_idx, sims) if s > tau_split]
        kept_sims = [s for s in sims if s <= tau_split]
        worst = float(max(kept_sims)) if kept_sims else None
    return SplitManifest(train_roots, bench_roots, tau_split, len(dropped), kept, bench_idx, dropped,
                         worst, seed=seed)
