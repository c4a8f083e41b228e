"""Binary fingerprints, Tanimoto scoring and OR-folding.

A fingerprint of length ``L`` is held as a Python ``int`` whose bit ``i``
is fingerprint position ``i``.  The packed array form used by the indexes
is an ``(n, ceil(L / 64))`` array of little-endian ``uint64`` words, so
position 0 is the least significant bit of the first word in both forms.

Hex text maps byte-wise: the first two hex characters are byte 0, which
holds positions 0-7, and the first character is the high nibble of that
byte.  ``"ff00..."`` therefore sets positions 0-7.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, FoldError, ParameterError

DEFAULT_LENGTH = 1024
WORD_BITS = 64
FIXED_BITS = 12
FIXED_ONE = 1 << FIXED_BITS
FIXED_MAX = FIXED_ONE - 1


def n_words(length: int) -> int:
    return -(-length // WORD_BITS)


@dataclass(frozen=True)
class Fingerprint:
    """Immutable fixed-width bit vector with a cached popcount.

    Database fingerprints are word aligned (``length % 64 == 0``); folded
    fingerprints may have any positive length.
    """

    bits: int
    length: int = DEFAULT_LENGTH
    id: int = 0
    bit_count: int = field(init=False, compare=False)

    def __post_init__(self):
        if self.length < 1:
            raise DimensionError(f"fingerprint length must be positive, got {self.length}")
        if self.bits < 0 or self.bits >> self.length:
            raise DimensionError(f"bits do not fit in {self.length} positions")
        if self.id < 0:
            raise ValueError(f"fingerprint id must be non-negative, got {self.id}")
        object.__setattr__(self, "bit_count", self.bits.bit_count())

    @classmethod
    def zeros(cls, length: int = DEFAULT_LENGTH, id: int = 0) -> "Fingerprint":
        return cls(0, length, id)

    @classmethod
    def ones(cls, length: int = DEFAULT_LENGTH, id: int = 0) -> "Fingerprint":
        return cls((1 << length) - 1, length, id)

    @classmethod
    def from_positions(
        cls, positions: Iterable[int], length: int = DEFAULT_LENGTH, id: int = 0
    ) -> "Fingerprint":
        bits = 0
        for p in positions:
            p = int(p)
            if not 0 <= p < length:
                raise DimensionError(f"position {p} outside [0, {length})")
            bits |= 1 << p
        return cls(bits, length, id)

    @classmethod
    def from_bitstring(cls, text: str, id: int = 0) -> "Fingerprint":
        """Parse ``"1100..."`` with position 0 leftmost."""
        return cls.from_positions(
            (i for i, ch in enumerate(text) if ch == "1"), len(text), id
        )

    @classmethod
    def from_hex(cls, text: str, length: int | None = None, id: int = 0) -> "Fingerprint":
        raw = bytes.fromhex(text)
        if length is None:
            length = len(raw) * 8
        elif len(raw) * 8 != length:
            raise DimensionError(f"{len(text)} hex chars do not encode {length} bits")
        return cls(int.from_bytes(raw, "little"), length, id)

    @classmethod
    def from_words(cls, words: np.ndarray, length: int, id: int = 0) -> "Fingerprint":
        raw = np.ascontiguousarray(words, dtype="<u8").tobytes()
        return cls(int.from_bytes(raw, "little"), length, id)

    def to_hex(self) -> str:
        return self.bits.to_bytes(-(-self.length // 8), "little").hex()

    def to_bitstring(self) -> str:
        return "".join("1" if self.bits >> i & 1 else "0" for i in range(self.length))

    def words(self) -> np.ndarray:
        raw = self.bits.to_bytes(n_words(self.length) * 8, "little")
        return np.frombuffer(raw, dtype="<u8").astype(np.uint64)

    def positions(self) -> list[int]:
        out, x = [], self.bits
        while x:
            low = x & -x
            out.append(low.bit_length() - 1)
            x ^= low
        return out

    def with_id(self, id: int) -> "Fingerprint":
        return Fingerprint(self.bits, self.length, id)

    def __or__(self, other: "Fingerprint") -> "Fingerprint":
        _check_lengths(self, other)
        return Fingerprint(self.bits | other.bits, self.length, self.id)

    def __and__(self, other: "Fingerprint") -> "Fingerprint":
        _check_lengths(self, other)
        return Fingerprint(self.bits & other.bits, self.length, self.id)


def _check_lengths(a: Fingerprint, b: Fingerprint) -> None:
    if a.length != b.length:
        raise DimensionError(f"fingerprint lengths differ: {a.length} vs {b.length}")


def popcount(fp: Fingerprint) -> int:
    return fp.bits.bit_count()


@dataclass(frozen=True)
class TanimotoScore:
    """Tanimoto similarity kept as its exact integer ratio.

    An empty union scores 0.
    """

    intersection: int
    union: int

    @property
    def exact(self) -> Fraction:
        if self.union == 0:
            return Fraction(0)
        return Fraction(self.intersection, self.union)

    @property
    def value(self) -> float:
        if self.union == 0:
            return 0.0
        return self.intersection / self.union

    @property
    def fixed12(self) -> int:
        if self.union == 0:
            return 0
        return min(FIXED_MAX, (FIXED_ONE * self.intersection) // self.union)

    @property
    def distance(self) -> float:
        return 1.0 - self.value

    def __float__(self) -> float:
        return self.value


def tanimoto(a: Fingerprint, b: Fingerprint) -> TanimotoScore:
    _check_lengths(a, b)
    inter = (a.bits & b.bits).bit_count()
    return TanimotoScore(inter, a.bit_count + b.bit_count - inter)


def fixed12(intersection: np.ndarray, union: np.ndarray) -> np.ndarray:
    """Vectorised 12-bit floor quantisation of ``intersection / union``."""
    intersection = np.asarray(intersection, dtype=np.int64)
    union = np.asarray(union, dtype=np.int64)
    q = (intersection << FIXED_BITS) // np.maximum(union, 1)
    return np.where(union > 0, np.minimum(q, FIXED_MAX), 0)


class FoldScheme(enum.Enum):
    SECTIONED = "sectioned"  # OR of the m contiguous sections of length L/m
    ADJACENT = "adjacent"  # OR of every run of m neighbouring bits

    @classmethod
    def parse(cls, value: "FoldScheme | str") -> "FoldScheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ParameterError(
                f"unknown fold scheme {value!r}; expected one of "
                + ", ".join(s.value for s in cls)
            ) from None


@dataclass(frozen=True)
class FoldSpec:
    scheme: FoldScheme = FoldScheme.SECTIONED
    m: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scheme", FoldScheme.parse(self.scheme))
        if self.m < 1 or self.m & (self.m - 1):
            raise FoldError(f"fold level must be a positive power of two, got {self.m}")

    def folded_length(self, length: int) -> int:
        if length % self.m:
            raise FoldError(f"fold level {self.m} does not divide length {length}")
        return length // self.m


def fold(fp: Fingerprint, spec: FoldSpec) -> Fingerprint:
    out_len = spec.folded_length(fp.length)
    if spec.m == 1:
        return fp
    if spec.scheme is FoldScheme.SECTIONED:
        mask = (1 << out_len) - 1
        bits = 0
        x = fp.bits
        while x:
            bits |= x & mask
            x >>= out_len
        return Fingerprint(bits, out_len, fp.id)
    folded = fold_words(fp.words()[None, :], fp.length, spec)[0]
    return Fingerprint.from_words(folded, out_len, fp.id)


# ---------------------------------------------------------------------------
# Packed (n, words) arrays
# ---------------------------------------------------------------------------


def pack(fps: Sequence[Fingerprint], length: int | None = None) -> np.ndarray:
    """Stack fingerprints into an ``(n, words)`` uint64 array."""
    if length is None:
        length = fps[0].length if fps else DEFAULT_LENGTH
    nbytes = n_words(length) * 8
    buf = bytearray(len(fps) * nbytes)
    for i, fp in enumerate(fps):
        if fp.length != length:
            raise DimensionError(f"fingerprint {fp.id} has length {fp.length}, expected {length}")
        buf[i * nbytes:(i + 1) * nbytes] = fp.bits.to_bytes(nbytes, "little")
    return np.frombuffer(bytes(buf), dtype="<u8").reshape(len(fps), n_words(length)).astype(np.uint64)


def popcount_rows(words: np.ndarray) -> np.ndarray:
    if words.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return np.bitwise_count(words).sum(axis=1, dtype=np.int64)


def intersection_counts(words: np.ndarray, query: np.ndarray) -> np.ndarray:
    if words.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return np.bitwise_count(words & query).sum(axis=1, dtype=np.int64)


def unpack_bits(words: np.ndarray, length: int) -> np.ndarray:
    """``(n, words)`` uint64 -> ``(n, length)`` bool, position 0 first."""
    raw = np.ascontiguousarray(words, dtype="<u8").view(np.uint8)
    bits = np.unpackbits(raw, axis=1, bitorder="little")
    return bits[:, :length].astype(bool)


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Inverse of :func:`unpack_bits`; pads each row to whole words."""
    n, length = bits.shape
    padded = np.zeros((n, n_words(length) * WORD_BITS), dtype=np.uint8)
    padded[:, :length] = bits
    raw = np.packbits(padded, axis=1, bitorder="little")
    return raw.view("<u8").astype(np.uint64)


def fold_words(words: np.ndarray, length: int, spec: FoldSpec) -> np.ndarray:
    out_len = spec.folded_length(length)
    if spec.m == 1:
        return np.array(words, dtype=np.uint64, copy=True)
    n = words.shape[0]
    bits = unpack_bits(words, length)
    if spec.scheme is FoldScheme.SECTIONED:
        folded = bits.reshape(n, spec.m, out_len).any(axis=1)
    else:
        folded = bits.reshape(n, out_len, spec.m).any(axis=2)
    return pack_bits(folded)
