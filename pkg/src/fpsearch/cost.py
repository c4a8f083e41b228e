"""Bandwidth-bounded throughput model for the streaming exhaustive engine.

Each kernel consumes one (folded) fingerprint per clock, so its memory
traffic is ``bits / m / 8`` bytes per cycle.  As many kernels run as the
usable memory bandwidth allows, and a query costs one cycle per scanned
database entry.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

from .errors import FoldError, ParameterError
from .topk import merge_cost, merge_latency, pq_cost

REFERENCE_DB_SIZE = 1_924_000


@dataclass(frozen=True)
class PlatformSpec:
    peak_bandwidth_GBs: float = 460.0
    efficiency: float = 0.9
    bandwidth_cap_GBs: float = 410.0
    kernel_freq_Hz: float = 450e6
    fingerprint_bits: int = 1024

    def __post_init__(self):
        for name in ("peak_bandwidth_GBs", "bandwidth_cap_GBs", "kernel_freq_Hz", "fingerprint_bits"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if not 0 < self.efficiency <= 1:
            raise ParameterError(f"efficiency must lie in (0, 1], got {self.efficiency}")

    @property
    def usable_bandwidth_GBs(self) -> float:
        return min(self.peak_bandwidth_GBs * self.efficiency, self.bandwidth_cap_GBs)


def kernel_bandwidth(spec: PlatformSpec, fold_m: int = 1) -> float:
    """GB/s one kernel streams at fold level ``fold_m``."""
    if fold_m < 1 or spec.fingerprint_bits % fold_m:
        raise FoldError(f"fold level {fold_m} does not divide {spec.fingerprint_bits} bits")
    bytes_per_cycle = spec.fingerprint_bits / fold_m / 8
    return bytes_per_cycle * spec.kernel_freq_Hz / 1e9


def max_kernels(spec: PlatformSpec, fold_m: int = 1) -> int:
    return math.floor(spec.usable_bandwidth_GBs / kernel_bandwidth(spec, fold_m))


def throughput_qps(
    spec: PlatformSpec, db_size: int = REFERENCE_DB_SIZE, fold_m: int = 1,
    pruned_fraction: float = 0.0, kernels: int | None = None,
) -> float:
    """Queries per second: ``kernels * f / (N * (1 - R))``.  Zero when infeasible."""
    if db_size < 1:
        raise ParameterError(f"db_size must be at least 1, got {db_size}")
    if not 0 <= pruned_fraction < 1:
        raise ParameterError(f"pruned fraction must lie in [0, 1), got {pruned_fraction}")
    if kernels is None:
        kernels = max_kernels(spec, fold_m)
    return kernels * spec.kernel_freq_Hz / (db_size * (1.0 - pruned_fraction))


@dataclass(frozen=True)
class CostReport:
    m: int
    kernel_GBs: float
    kernels: int
    qps: float
    feasible: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def cost_report(
    spec: PlatformSpec = PlatformSpec(), fold_m: int = 1,
    db_size: int = REFERENCE_DB_SIZE, pruned_fraction: float = 0.0,
) -> CostReport:
    kernels = max_kernels(spec, fold_m)
    return CostReport(
        m=fold_m,
        kernel_GBs=kernel_bandwidth(spec, fold_m),
        kernels=kernels,
        qps=throughput_qps(spec, db_size, fold_m, pruned_fraction, kernels),
        feasible=kernels > 0,
    )


def topk_report(k: int, n: int = 0) -> dict:
    """Comparator, FIFO and latency figures for both top-k engines at size ``k``."""
    comparators, fifo = merge_cost(k)
    return {
        "k": k,
        "merge_comparators": comparators,
        "merge_fifo_capacity": fifo,
        "merge_latency_cycles": merge_latency(n, k),
        "pq_comparators": pq_cost(k),
    }
