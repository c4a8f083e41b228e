"""Software models of two hardware top-k structures.

``BoundedPriorityQueue`` mirrors a register-array queue: slots stay sorted
best-first, a new entry enters at the tail and settles through alternating
even/odd compare-swap phases, one phase per simulated cycle.

``merge_topk_stream`` mirrors a streaming merge sorter: stage ``s`` merges
sorted runs of length ``2**(s-1)`` into runs of ``2**s`` until a run of
``k`` is formed, and a final merge stage folds each run into the running
top-k.  It is simulated per transaction with one entry consumed per cycle.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .errors import ParameterError, QueueUnderflow
from .fingerprint import FIXED_MAX


@dataclass(frozen=True)
class ScoredEntry:
    score: int  # 12-bit fixed point
    id: int

    def __post_init__(self):
        if not 0 <= self.score <= FIXED_MAX:
            raise ParameterError(f"score {self.score} outside [0, {FIXED_MAX}]")


def _best_first(e: ScoredEntry) -> tuple[int, int]:
    return (-e.score, e.id)


def _log2_exact(k: int) -> int:
    if k < 1 or k & (k - 1):
        raise ParameterError(f"k must be a positive power of two, got {k}")
    return k.bit_length() - 1


class BoundedPriorityQueue:
    """Sorted register array holding at most ``capacity`` entries.

    ``polarity="max"`` keeps the highest scores (dequeue returns the
    largest); ``"min"`` keeps the lowest.  Equal scores order by id
    ascending in both polarities.
    """

    def __init__(self, capacity: int, polarity: str = "max"):
        if capacity < 1:
            raise ParameterError(f"capacity must be positive, got {capacity}")
        if polarity not in ("max", "min"):
            raise ParameterError(f"polarity must be 'max' or 'min', got {polarity!r}")
        self.capacity = capacity
        self.polarity = polarity
        self.slots: list[ScoredEntry] = []
        self.cycles = 0

    def _key(self, e: ScoredEntry) -> tuple[int, int]:
        return (-e.score, e.id) if self.polarity == "max" else (e.score, e.id)

    def __len__(self) -> int:
        return len(self.slots)

    @property
    def size(self) -> int:
        return len(self.slots)

    def peek(self) -> ScoredEntry:
        if not self.slots:
            raise QueueUnderflow("peek on empty queue")
        return self.slots[0]

    def _phase(self, parity: int) -> bool:
        slots, key = self.slots, self._key
        swapped = False
        for i in range(parity, len(slots) - 1, 2):
            if key(slots[i + 1]) < key(slots[i]):
                slots[i], slots[i + 1] = slots[i + 1], slots[i]
                swapped = True
        return swapped

    def enqueue(self, entry: ScoredEntry) -> None:
        slots = self.slots
        if len(slots) == self.capacity:
            if self._key(entry) >= self._key(slots[-1]):
                self.cycles += 1
                return
            slots[-1] = entry  # tail register is the eviction slot
        else:
            slots.append(entry)
        parity = 0
        idle = 0
        while idle < 2:
            self.cycles += 1
            idle = 0 if self._phase(parity) else idle + 1
            parity ^= 1

    def dequeue(self) -> ScoredEntry:
        if not self.slots:
            raise QueueUnderflow("dequeue from empty queue")
        self.cycles += 1
        return self.slots.pop(0)

    def items(self) -> list[ScoredEntry]:
        return list(self.slots)


class MergeResult(NamedTuple):
    entries: list[ScoredEntry]
    cycles: int


def _merge(a: Sequence[ScoredEntry], b: Sequence[ScoredEntry], limit: int | None = None) -> list[ScoredEntry]:
    left, right = deque(a), deque(b)
    out: list[ScoredEntry] = []
    while left and right and (limit is None or len(out) < limit):
        if _best_first(right[0]) < _best_first(left[0]):
            out.append(right.popleft())
        else:
            out.append(left.popleft())
    rest = left or right
    while rest and (limit is None or len(out) < limit):
        out.append(rest.popleft())
    return out


def merge_topk_stream(stream: Iterable[ScoredEntry], k: int) -> MergeResult:
    """Best ``k`` entries of the stream (score desc, id asc) and the cycle count."""
    stages = _log2_exact(k)
    best: list[ScoredEntry] = []
    n = 0
    block: list[ScoredEntry] = []

    def flush() -> None:
        nonlocal best
        runs = [[e] for e in block]
        for _ in range(stages):
            merged = [_merge(runs[i], runs[i + 1]) for i in range(0, len(runs) - 1, 2)]
            if len(runs) % 2:
                merged.append(runs[-1])
            runs = merged
        best = _merge(best, runs[0], limit=k)
        block.clear()

    for e in stream:
        block.append(e)
        n += 1
        if len(block) == k:
            flush()
    if block:
        flush()
    return MergeResult(best, n + stages)


def merge_cost(k: int) -> tuple[int, int]:
    """``(comparators, fifo_capacity)`` of the merge sorter: ``log2 k + 1`` and ``log2 k + 2k``."""
    stages = _log2_exact(k)
    return stages + 1, stages + 2 * k


def merge_latency(n: int, k: int) -> int:
    return n + _log2_exact(k)


def pq_cost(k: int) -> int:
    """Comparators of the register-array queue: one per slot."""
    if k < 1:
        raise ParameterError(f"k must be positive, got {k}")
    return k
