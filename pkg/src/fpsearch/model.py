"""Gaussian bit-count model of BitBound pruning.

Bit counts are treated as a continuous ``N(mu, sigma^2)`` variable.  For a
query with ``c`` set bits and cutoff ``Sc`` the scan keeps database counts
in ``[c*Sc, c/Sc]``; the pruned fraction is the probability mass outside
that band.  The expected speedup averages the kept mass over queries drawn
from the same distribution and takes the reciprocal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import FitError, ParameterError
from .exact import BitBoundIndex, prune_range

QUAD_TOL = 1e-8
SPAN_SIGMAS = 8.0


@dataclass(frozen=True)
class GaussianFit:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise FitError(f"sigma must be positive, got {self.sigma}")

    @property
    def dist(self) -> NormalDist:
        return NormalDist(self.mu, self.sigma)

    def pdf(self, x: float) -> float:
        z = (x - self.mu) / self.sigma
        return math.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi))

    def cdf(self, x: float) -> float:
        if x == math.inf:
            return 1.0
        return self.dist.cdf(x)


def fit_gaussian(counts: Iterable[int]) -> GaussianFit:
    """Sample mean and population standard deviation of the bit counts."""
    x = np.asarray(list(counts), dtype=np.float64)
    if x.size < 2:
        raise FitError(f"need at least 2 samples, got {x.size}")
    sigma = float(x.std())
    if sigma == 0:
        raise FitError(
            "all samples are equal, so the spread is zero; "
            "a Gaussian model needs bit counts that vary"
        )
    return GaussianFit(float(x.mean()), sigma)


def _check_cutoff(cutoff: float) -> float:
    cutoff = float(cutoff)
    if not 0 < cutoff <= 1:
        raise ParameterError(f"similarity cutoff must lie in (0, 1], got {cutoff}")
    return cutoff


def retained_fraction(fit: GaussianFit, query_count: float, cutoff: float) -> float:
    cutoff = _check_cutoff(cutoff)
    upper = query_count / cutoff
    kept = fit.cdf(upper) - fit.cdf(query_count * cutoff)
    return min(1.0, max(0.0, kept))


def pruned_fraction(fit: GaussianFit, query_count: float, cutoff: float) -> float:
    """Share of the database the bit-count band excludes for one query."""
    return 1.0 - retained_fraction(fit, query_count, cutoff)


def adaptive_trapezoid(
    f: Callable[[float], float], a: float, b: float, tol: float = QUAD_TOL,
    min_level: int = 6, max_level: int = 24,
) -> float:
    """Trapezoid rule with step halving until successive estimates agree to ``tol``."""
    n = 1
    h = b - a
    total = 0.5 * h * (f(a) + f(b))
    for level in range(1, max_level + 1):
        h *= 0.5
        mid = sum(f(a + (2 * i + 1) * h) for i in range(n))
        refined = 0.5 * total + h * mid
        n *= 2
        if level >= min_level and abs(refined - total) < tol:
            return refined
        total = refined
    return total


def mean_retained_fraction(fit: GaussianFit, cutoff: float, tol: float = QUAD_TOL) -> float:
    cutoff = _check_cutoff(cutoff)
    a = fit.mu - SPAN_SIGMAS * fit.sigma
    b = fit.mu + SPAN_SIGMAS * fit.sigma
    return adaptive_trapezoid(
        lambda c: retained_fraction(fit, c, cutoff) * fit.pdf(c), a, b, tol
    )


def mean_pruned_fraction(fit: GaussianFit, cutoff: float, tol: float = QUAD_TOL) -> float:
    return 1.0 - mean_retained_fraction(fit, cutoff, tol)


def expected_speedup(fit: GaussianFit, cutoff: float, tol: float = QUAD_TOL) -> float:
    """Reciprocal of the expected scanned share for same-distribution queries."""
    return 1.0 / mean_retained_fraction(fit, cutoff, tol)


def empirical_pruned_fraction(idx: BitBoundIndex, queries: Sequence, cutoff: float) -> float:
    """Mean share of the index outside each query's bit-count window.

    ``queries`` may hold fingerprints or plain bit counts.
    """
    total = len(idx)
    if total == 0:
        raise ParameterError("index is empty")
    if not len(queries):
        raise ParameterError("no queries given")
    pruned = []
    for q in queries:
        count = q if isinstance(q, (int, np.integer)) else q.bit_count
        window = idx.band(*prune_range(int(count), cutoff))
        pruned.append(1.0 - (window.stop - window.start) / total)
    return float(np.mean(pruned))


def model_table(fit: GaussianFit, cutoffs: Sequence[float]) -> list[tuple[float, float, float]]:
    """``(Sc, mean pruned fraction, speedup)`` rows."""
    rows = []
    for sc in cutoffs:
        kept = mean_retained_fraction(fit, sc)
        rows.append((float(sc), 1.0 - kept, 1.0 / kept))
    return rows
