from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import CATEGORIES
from .shards import load_records


@dataclass
class EpochEvent:
    category: str
    batch_index: int
    epoch: int      # epoch that starts here (1 = first wrap-around)


def category_counts(batch_size: int, n_categories: int, batch_index: int) -> list[int]:
    """Per-category counts for one batch. When ``n_categories`` does not divide the
    batch, the remainder goes to consecutive categories starting at a position
    that advances by the remainder each batch."""
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    base, rem = divmod(batch_size, n_categories)
    counts = [base] * n_categories
    start = (batch_index * rem) % n_categories
    for j in range(rem):
        counts[(start + j) % n_categories] += 1
    return counts


class BalancedSampler:
    """Category-balanced mini-batches with seeded within-category shuffling.

    ``categories`` defaults to the tags present in the data, in canonical order.
    A category that runs out reshuffles and starts again; each wrap is appended
    to ``epochs``.
    """

    def __init__(self, records, batch_size, seed=0, categories=None, workers=1):
        self.records = load_records(records, workers=workers)
        if not self.records:
            raise ValueError("balanced sampling needs a non-empty dataset")
        present = {r.category for r in self.records}
        self.categories = list(categories) if categories else [c for c in CATEGORIES if c in present]
        missing = [c for c in self.categories if c not in present]
        if missing:
            raise ValueError(f"no records for categories {missing}")
        self.batch_size = batch_size
        self.seed = seed
        self.pools = {c: [i for i, r in enumerate(self.records) if r.category == c] for c in self.categories}
        self._rngs = {c: np.random.default_rng([seed, k]) for k, c in enumerate(self.categories)}
        self._order = {c: self._shuffle(c) for c in self.categories}
        self._cursor = {c: 0 for c in self.categories}
        self._epoch = {c: 0 for c in self.categories}
        self.epochs: list[EpochEvent] = []
        self.batch_index = 0

    def _shuffle(self, c):
        pool = self.pools[c]
        return [pool[i] for i in self._rngs[c].permutation(len(pool))]

    def _take(self, c, k):
        out = []
        while len(out) < k:
            if self._cursor[c] == len(self._order[c]):
                self._order[c] = self._shuffle(c)
                self._cursor[c] = 0
                self._epoch[c] += 1
                self.epochs.append(EpochEvent(c, self.batch_index, self._epoch[c]))
            out.append(self._order[c][self._cursor[c]])
            self._cursor[c] += 1
        return out

    def next_indices(self) -> list[int]:
        counts = category_counts(self.batch_size, len(self.categories), self.batch_index)
        idx = [i for c, k in zip(self.categories, counts) for i in self._take(c, k)]
        self.batch_index += 1
        return idx

    def __iter__(self):
        return self

    def __next__(self):
        return [self.records[i] for i in self.next_indices()]


def balanced_batches(records, batch_size, seed=0, num_batches=None, categories=None, workers=1):
    """Generator over balanced batches; infinite unless ``num_batches`` is given."""
    sampler = BalancedSampler(records, batch_size, seed, categories, workers)
    n = 0
    while num_batches is None or n < num_batches:
        yield next(sampler)
        n += 1
