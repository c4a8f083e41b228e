"""Fingerprint text files and synthetic databases.

Text format: one fingerprint per line as ``HEX`` or ``HEX<TAB>ID`` with
``L / 4`` hex digits (byte order as in :mod:`fpsearch.fingerprint`).
Blank lines and lines starting with ``#`` are ignored.  Without an ID
column, ids count data lines from 0.
"""

from __future__ import annotations

import math
import os
import re
from typing import Iterable, TextIO

import numpy as np

from .errors import ParameterError, ParseError
from .fingerprint import DEFAULT_LENGTH, Fingerprint, pack_bits

_HEX = re.compile(r"[0-9a-fA-F]+")


def parse_fps(lines: Iterable[str], length: int | None = None) -> list[Fingerprint]:
    fps: list[Fingerprint] = []
    seen: set[int] = set()
    explicit: bool | None = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) > 2:
            raise ParseError("expected HEX or HEX<TAB>ID", lineno)
        hex_text = fields[0].strip()
        if not _HEX.fullmatch(hex_text) or len(hex_text) % 2:
            raise ParseError(f"malformed hex {hex_text[:16]!r}", lineno)
        bits = len(hex_text) * 4
        if length is None:
            length = bits
        if bits != length:
            raise ParseError(f"expected {length // 4} hex digits, got {len(hex_text)}", lineno)
        if length % 64:
            raise ParseError(f"fingerprint length {length} is not a multiple of 64", lineno)
        has_id = len(fields) == 2
        if explicit is None:
            explicit = has_id
        elif explicit != has_id:
            raise ParseError("mixing lines with and without an id column", lineno)
        if has_id:
            try:
                fid = int(fields[1])
            except ValueError:
                raise ParseError(f"bad id {fields[1]!r}", lineno) from None
            if fid < 0:
                raise ParseError(f"negative id {fid}", lineno)
            if fid in seen:
                raise ParseError(f"duplicate id {fid}", lineno)
            seen.add(fid)
        else:
            fid = len(fps)
        fps.append(Fingerprint.from_hex(hex_text, length, fid))
    return fps


def ingest(path: str | os.PathLike, length: int | None = None) -> list[Fingerprint]:
    with open(path, encoding="ascii") as fh:
        return parse_fps(fh, length)


def write_fps(fps: Iterable[Fingerprint], fh: TextIO, with_ids: bool = True) -> None:
    for fp in fps:
        fh.write(fp.to_hex())
        if with_ids:
            fh.write(f"\t{fp.id}")
        fh.write("\n")


def save_fps(fps: Iterable[Fingerprint], path: str | os.PathLike, with_ids: bool = True) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        write_fps(fps, fh, with_ids)


def bit_profile(length: int, amplitude: float, periods: float = 3.3) -> np.ndarray:
    """Smooth per-position bit weights, normalised to sum to 1.

    ``amplitude = 0`` is uniform.  Larger amplitudes make neighbouring
    positions share similar, strongly varying set probabilities.
    """
    x = np.arange(length)
    w = np.exp(amplitude * np.sin(2 * np.pi * periods * x / length))
    return w / w.sum()


def _sample_rows(rng: np.random.Generator, weights: np.ndarray, counts: np.ndarray,
                 blocked: np.ndarray | None = None) -> np.ndarray:
    """Per row, ``counts[i]`` distinct positions drawn without replacement by weight.

    Uses exponential race keys: the ``c`` smallest ``E / w`` are a weighted
    draw without replacement.
    """
    n, length = counts.shape[0], weights.shape[0]
    keys = rng.exponential(size=(n, length)) / weights
    if blocked is not None:
        keys[blocked] = np.inf
    ranks = np.argsort(np.argsort(keys, axis=1, kind="stable"), axis=1, kind="stable")
    return ranks < counts[:, None]


def synthesize(
    n: int,
    length: int = DEFAULT_LENGTH,
    mu: float = 47.5,
    sigma: float = 12.2,
    seed: int = 0,
    *,
    profile_amplitude: float = 0.0,
    family_size: int = 1,
    keep: float = 0.7,
    chunk: int = 4096,
) -> list[Fingerprint]:
    """Random database with Gaussian bit counts.

    Each fingerprint draws ``c = round(N(mu, sigma^2))`` clamped to
    ``[0, length]`` and sets ``c`` distinct positions.  With the defaults
    positions are uniform.  ``profile_amplitude`` skews positions by
    :func:`bit_profile`; ``family_size > 1`` groups fingerprints into analog
    series that take a ``keep`` share of their bits from a common prototype,
    which gives each query a population of genuinely close neighbours.
    Same arguments, same output.
    """
    if n < 0:
        raise ParameterError(f"n must be non-negative, got {n}")
    if length < 1 or length % 64:
        raise ParameterError(f"length must be a positive multiple of 64, got {length}")
    if not 0 < mu < length:
        raise ParameterError(f"mu must lie in (0, {length}), got {mu}")
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if family_size < 1:
        raise ParameterError(f"family_size must be at least 1, got {family_size}")
    if not 0 <= keep <= 1:
        raise ParameterError(f"keep must lie in [0, 1], got {keep}")

    rng = np.random.default_rng(seed)
    counts = np.clip(np.rint(rng.normal(mu, sigma, size=n)), 0, length).astype(np.int64)
    weights = bit_profile(length, profile_amplitude)

    protos = family = None
    if family_size > 1:
        n_fam = max(1, math.ceil(n / family_size))
        proto_size = min(length, int(round(1.5 * mu)))
        protos = _sample_rows(rng, weights, np.full(n_fam, proto_size))
        family = rng.integers(0, n_fam, size=n)

    out: list[Fingerprint] = []
    for start in range(0, n, chunk):
        c = counts[start:start + chunk]
        if protos is None:
            bits = _sample_rows(rng, weights, c)
        else:
            proto = protos[family[start:start + chunk]]
            inherited = np.minimum(np.rint(keep * c).astype(np.int64), proto.sum(axis=1))
            uniform = np.ones(length) / length
            bits = _sample_rows(rng, uniform, inherited, blocked=~proto)
            bits |= _sample_rows(rng, weights, c - inherited, blocked=bits)
        words = pack_bits(bits)
        for i, row in enumerate(words):
            out.append(Fingerprint.from_words(row, length, start + i))
    return out
