"""Search result container and the global ranking order.

Every search ranks hits by score descending, then id ascending.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .fingerprint import TanimotoScore


class Hit(NamedTuple):
    score: TanimotoScore
    id: int


@dataclass
class TopKResult:
    hits: list[Hit] = field(default_factory=list)
    # similarity evaluations spent producing this result
    evaluations: int = 0

    def __len__(self) -> int:
        return len(self.hits)

    def __iter__(self) -> Iterator[Hit]:
        return iter(self.hits)

    def __getitem__(self, i):
        return self.hits[i]

    @property
    def ids(self) -> list[int]:
        return [h.id for h in self.hits]

    @property
    def scores(self) -> list[float]:
        return [h.score.value for h in self.hits]

    def as_tuples(self) -> list[tuple[int, int, int]]:
        """``(id, intersection, union)`` triples, convenient for equality checks."""
        return [(h.id, h.score.intersection, h.score.union) for h in self.hits]

    def same_hits(self, other: "TopKResult") -> bool:
        return self.as_tuples() == other.as_tuples()


def score_values(inter: np.ndarray, union: np.ndarray) -> np.ndarray:
    """Float ranking key for integer ratios.

    Distinct ratios with denominators below 2**26 never collide in float64,
    and equal ratios always produce the same float, so this key orders
    exactly like the rationals themselves.
    """
    inter = np.asarray(inter, dtype=np.float64)
    union = np.asarray(union, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)


def select_top(values: np.ndarray, ids: np.ndarray, k: int) -> np.ndarray:
    """Positions of the ``k`` best rows under (value desc, id asc), ranked."""
    n = values.shape[0]
    if k <= 0 or n == 0:
        return np.zeros(0, dtype=np.int64)
    if n > k:
        kth = np.partition(values, n - k)[n - k]
        pool = np.flatnonzero(values >= kth)
    else:
        pool = np.arange(n)
    order = np.lexsort((ids[pool], -values[pool]))
    return pool[order[:k]]


def build_result(
    rows: np.ndarray,
    inter: np.ndarray,
    union: np.ndarray,
    ids: np.ndarray,
    evaluations: int = 0,
) -> TopKResult:
    hits = [
        Hit(TanimotoScore(int(inter[r]), int(union[r])), int(ids[r])) for r in rows
    ]
    return TopKResult(hits, evaluations)


def rank_hits(hits: list[Hit], k: int | None = None) -> list[Hit]:
    ranked = sorted(hits, key=lambda h: (-h.score.value, h.id))
    return ranked if k is None else ranked[:k]
