"""Exhaustive search: brute force, BitBound pruning and two-stage folded search.

The BitBound index keeps the database sorted by (bit count, id) together
with a bucket offset table, so the candidates allowed by a similarity
cutoff form one contiguous slice.  Cutoffs are handled as exact rationals
(``0.8`` means 4/5) so that band pruning and the final score filter agree
to the last bit.
"""

from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import BinaryIO, Sequence, Union

import numpy as np

from .errors import BuildError, DimensionError, FormatError, IndexStateError, ParameterError
from .fingerprint import (
    WORD_BITS,
    Fingerprint,
    FoldScheme,
    FoldSpec,
    fold_words,
    intersection_counts,
    n_words,
    pack,
    popcount_rows,
)
from .results import TopKResult, build_result, score_values, select_top

Cutoff = Union[float, str, Fraction]


def as_cutoff(cutoff: Cutoff) -> Fraction:
    """Exact rational cutoff in (0, 1]; floats are read by their shortest repr."""
    try:
        if isinstance(cutoff, float):
            value = Fraction(repr(cutoff))
        else:
            value = Fraction(cutoff)
    except (ValueError, TypeError, ZeroDivisionError):
        raise ParameterError(f"invalid similarity cutoff {cutoff!r}") from None
    if not 0 < value <= 1:
        raise ParameterError(f"similarity cutoff must lie in (0, 1], got {cutoff}")
    return value


def prune_range(query_count: int, cutoff: Cutoff) -> tuple[int, int]:
    """Bit-count window ``[ceil(c*Sc), floor(c/Sc)]`` that can reach the cutoff."""
    sc = as_cutoff(cutoff)
    if query_count < 0:
        raise ParameterError(f"query bit count must be non-negative, got {query_count}")
    lo = -(-query_count * sc.numerator // sc.denominator)
    hi = query_count * sc.denominator // sc.numerator
    return lo, hi


def k_first_round(k: int, m: int) -> int:
    """Stage-one candidate count ``k * m * ceil(log2(2m))``."""
    if k < 1 or m < 1:
        raise ParameterError(f"k and m must be positive, got k={k}, m={m}")
    return k * m * (2 * m - 1).bit_length()


@dataclass
class FingerprintSet:
    """Packed database: ids, uint64 words and popcounts in parallel arrays."""

    length: int
    ids: np.ndarray
    words: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_fingerprints(cls, fps: Sequence[Fingerprint], length: int | None = None) -> "FingerprintSet":
        if length is None:
            length = fps[0].length if len(fps) else 1024
        words = pack(fps, length)
        ids = np.fromiter((fp.id for fp in fps), dtype=np.int64, count=len(fps))
        return cls(length, ids, words, popcount_rows(words))

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    def fingerprint(self, row: int) -> Fingerprint:
        return Fingerprint.from_words(self.words[row], self.length, int(self.ids[row]))

    @property
    def entries(self) -> list[Fingerprint]:
        return [self.fingerprint(i) for i in range(len(self))]


def as_fingerprint_set(db) -> FingerprintSet:
    if isinstance(db, (FingerprintSet, BitBoundIndex)):
        return db
    return FingerprintSet.from_fingerprints(list(db))


def _check_query(db, q: Fingerprint) -> None:
    if q.length != db.length:
        raise DimensionError(f"query length {q.length} does not match database length {db.length}")


def _cutoff_mask(inter: np.ndarray, union: np.ndarray, sc: Fraction) -> np.ndarray:
    return (union > 0) & (inter * sc.denominator >= union * sc.numerator)


def search_bruteforce(db, q: Fingerprint, k: int) -> TopKResult:
    """Linear scan of the whole database."""
    if k < 1:
        raise ParameterError(f"k must be at least 1, got {k}")
    db = as_fingerprint_set(db)
    _check_query(db, q)
    inter = intersection_counts(db.words, q.words())
    union = db.counts + q.bit_count - inter
    rows = select_top(score_values(inter, union), db.ids, k)
    return build_result(rows, inter, union, db.ids, evaluations=len(db))


@dataclass
class BitBoundIndex(FingerprintSet):
    """Database sorted by (bit count, id) with a bucket offset table.

    ``offsets[c]`` is the first row whose bit count is at least ``c``;
    the table has ``length + 2`` entries.
    """

    offsets: np.ndarray = None
    fold_spec: FoldSpec | None = None
    folded_words: np.ndarray | None = None
    folded_counts: np.ndarray | None = None

    @property
    def folded_length(self) -> int | None:
        return None if self.fold_spec is None else self.fold_spec.folded_length(self.length)

    def band(self, lo: int, hi: int) -> slice:
        if lo > self.length or hi < lo:
            return slice(0, 0)
        hi = min(hi, self.length)
        return slice(int(self.offsets[lo]), int(self.offsets[hi + 1]))

    def folded_entries(self) -> list[Fingerprint] | None:
        if self.fold_spec is None:
            return None
        flen = self.folded_length
        return [
            Fingerprint.from_words(self.folded_words[i], flen, int(self.ids[i]))
            for i in range(len(self))
        ]


def _bucket_offsets(counts: np.ndarray, length: int) -> np.ndarray:
    return np.searchsorted(counts, np.arange(length + 2), side="left").astype(np.int64)


def build_bitbound(db, spec: FoldSpec | None = None) -> BitBoundIndex:
    if isinstance(db, FingerprintSet):
        packed = db
    else:
        db = list(db)
        lengths = {fp.length for fp in db}
        if len(lengths) > 1:
            raise DimensionError(f"mixed fingerprint lengths {sorted(lengths)}")
        packed = FingerprintSet.from_fingerprints(db)
    length = packed.length
    if length % WORD_BITS:
        raise DimensionError(f"database fingerprint length must be a multiple of 64, got {length}")
    if spec is not None:
        spec.folded_length(length)
    ids = packed.ids
    if len(np.unique(ids)) != len(ids):
        uniq, counts = np.unique(ids, return_counts=True)
        raise BuildError(f"duplicate fingerprint id {int(uniq[counts > 1][0])}")
    order = np.lexsort((ids, packed.counts))
    words = packed.words[order]
    counts = packed.counts[order]
    idx = BitBoundIndex(
        length=length,
        ids=ids[order],
        words=words,
        counts=counts,
        offsets=_bucket_offsets(counts, length),
    )
    if spec is not None:
        _attach_fold(idx, spec)
    return idx


def _attach_fold(idx: BitBoundIndex, spec: FoldSpec) -> None:
    idx.fold_spec = spec
    idx.folded_words = fold_words(idx.words, idx.length, spec)
    idx.folded_counts = popcount_rows(idx.folded_words)


def search_bitbound(idx: BitBoundIndex, q: Fingerprint, k: int, cutoff: Cutoff) -> TopKResult:
    """Exact top-k among entries scoring at least ``cutoff``."""
    if k < 1:
        raise ParameterError(f"k must be at least 1, got {k}")
    _check_query(idx, q)
    sc = as_cutoff(cutoff)
    window = idx.band(*prune_range(q.bit_count, sc))
    ids = idx.ids[window]
    inter = intersection_counts(idx.words[window], q.words())
    union = idx.counts[window] + q.bit_count - inter
    keep = np.flatnonzero(_cutoff_mask(inter, union, sc))
    rows = keep[select_top(score_values(inter[keep], union[keep]), ids[keep], k)]
    return build_result(rows, inter, union, ids, evaluations=len(ids))


def search_two_stage(
    idx: BitBoundIndex, q: Fingerprint, k: int, cutoff: Cutoff | None = None
) -> TopKResult:
    """Folded coarse search for ``k_r1`` candidates, then exact rescoring.

    The optional cutoff prunes stage one by the unfolded bit counts and
    filters stage two on exact scores; folded scores are never compared
    against it.
    """
    if idx.fold_spec is None:
        raise IndexStateError("two-stage search needs an index built with a FoldSpec")
    if k < 1:
        raise ParameterError(f"k must be at least 1, got {k}")
    _check_query(idx, q)
    spec = idx.fold_spec
    sc = None if cutoff is None else as_cutoff(cutoff)
    window = slice(0, len(idx)) if sc is None else idx.band(*prune_range(q.bit_count, sc))

    fq = fold_words(q.words()[None, :], idx.length, spec)[0]
    fq_count = int(np.bitwise_count(fq).sum())
    ids = idx.ids[window]
    f_inter = intersection_counts(idx.folded_words[window], fq)
    f_union = idx.folded_counts[window] + fq_count - f_inter
    cand = select_top(score_values(f_inter, f_union), ids, k_first_round(k, spec.m))

    rows = np.arange(window.start, window.stop)[cand]
    inter = intersection_counts(idx.words[rows], q.words())
    union = idx.counts[rows] + q.bit_count - inter
    cand_ids = idx.ids[rows]
    keep = np.arange(len(rows)) if sc is None else np.flatnonzero(_cutoff_mask(inter, union, sc))
    best = keep[select_top(score_values(inter[keep], union[keep]), cand_ids[keep], k)]
    return build_result(best, inter, union, cand_ids, evaluations=len(ids) + len(rows))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

MAGIC = b"MSKB"
VERSION = 1
_HEADER = struct.Struct("<4sHIIBQ")
_SCHEME_CODES = {None: 0, FoldScheme.SECTIONED: 1, FoldScheme.ADJACENT: 2}
_SCHEMES = {v: k for k, v in _SCHEME_CODES.items()}


def _entry_dtype(words: int) -> np.dtype:
    return np.dtype([("id", "<u8"), ("bit_count", "<u2"), ("words", "<u8", (words,))])


def dump_bitbound(idx: BitBoundIndex, fh: BinaryIO) -> None:
    """Write the little-endian ``MSKB`` layout.

    Header: magic, u16 version, u32 length, u32 fold level (0 = unfolded),
    u8 scheme (0 none, 1 sectioned, 2 adjacent), u64 entry count.  Then one
    record per entry ``(u64 id, u16 bit_count, words)`` and, for folded
    indexes, the folded words of every entry in the same order.
    """
    spec = idx.fold_spec
    scheme = None if spec is None else spec.scheme
    m = 0 if spec is None else spec.m
    fh.write(_HEADER.pack(MAGIC, VERSION, idx.length, m, _SCHEME_CODES[scheme], len(idx)))
    rec = np.zeros(len(idx), dtype=_entry_dtype(n_words(idx.length)))
    rec["id"] = idx.ids
    rec["bit_count"] = idx.counts
    rec["words"] = idx.words
    fh.write(rec.tobytes())
    if spec is not None:
        fh.write(np.ascontiguousarray(idx.folded_words, dtype="<u8").tobytes())


def load_bitbound(fh: BinaryIO) -> BitBoundIndex:
    head = fh.read(_HEADER.size)
    if len(head) != _HEADER.size:
        raise FormatError("truncated header")
    magic, version, length, m, scheme_code, count = _HEADER.unpack(head)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if scheme_code not in _SCHEMES or (scheme_code == 0) != (m == 0):
        raise FormatError(f"inconsistent fold header m={m} scheme={scheme_code}")
    dtype = _entry_dtype(n_words(length))
    body = fh.read(dtype.itemsize * count)
    if len(body) != dtype.itemsize * count:
        raise FormatError("truncated entry table")
    rec = np.frombuffer(body, dtype=dtype)
    words = rec["words"].astype(np.uint64).reshape(count, n_words(length))
    counts = rec["bit_count"].astype(np.int64)
    if not np.array_equal(counts, popcount_rows(words)):
        raise FormatError("stored bit counts do not match the fingerprints")
    if count and np.any(np.diff(counts) < 0):
        raise FormatError("entries are not sorted by bit count")
    idx = BitBoundIndex(
        length=length,
        ids=rec["id"].astype(np.int64),
        words=words,
        counts=counts,
        offsets=_bucket_offsets(counts, length),
    )
    if m:
        spec = FoldSpec(_SCHEMES[scheme_code], m)
        fwords = n_words(spec.folded_length(length))
        block = fh.read(8 * fwords * count)
        if len(block) != 8 * fwords * count:
            raise FormatError("truncated folded block")
        idx.fold_spec = spec
        idx.folded_words = np.frombuffer(block, dtype="<u8").astype(np.uint64).reshape(count, fwords)
        idx.folded_counts = popcount_rows(idx.folded_words)
    return idx


def save_bitbound(idx: BitBoundIndex, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        dump_bitbound(idx, fh)


def read_bitbound(path: str | os.PathLike) -> BitBoundIndex:
    with open(path, "rb") as fh:
        return load_bitbound(fh)


def bitbound_bytes(idx: BitBoundIndex) -> bytes:
    buf = io.BytesIO()
    dump_bitbound(idx, buf)
    return buf.getvalue()
