"""Exact and approximate Tanimoto top-k search over binary molecular fingerprints."""

from .cost import CostReport, PlatformSpec, cost_report, kernel_bandwidth, max_kernels, throughput_qps
from .data import ingest, parse_fps, synthesize, write_fps
from .errors import (
    BuildError,
    DimensionError,
    FitError,
    FoldError,
    FormatError,
    FpSearchError,
    IndexStateError,
    InsertError,
    ParameterError,
    ParseError,
    QueueUnderflow,
)
from .exact import (
    BitBoundIndex,
    FingerprintSet,
    build_bitbound,
    k_first_round,
    prune_range,
    read_bitbound,
    save_bitbound,
    search_bitbound,
    search_bruteforce,
    search_two_stage,
)
from .fingerprint import (
    Fingerprint,
    FoldScheme,
    FoldSpec,
    TanimotoScore,
    fixed12,
    fold,
    popcount,
    tanimoto,
)
from .hnsw import HnswIndex, HnswParams, build_hnsw, read_hnsw, save_hnsw
from .model import (
    GaussianFit,
    expected_speedup,
    fit_gaussian,
    mean_pruned_fraction,
    model_table,
    pruned_fraction,
)
from .results import Hit, TopKResult
from .topk import BoundedPriorityQueue, MergeResult, ScoredEntry, merge_cost, merge_topk_stream, pq_cost

__version__ = "0.1.0"

__all__ = [
    "BitBoundIndex",
    "BoundedPriorityQueue",
    "BuildError",
    "CostReport",
    "DimensionError",
    "Fingerprint",
    "FingerprintSet",
    "FitError",
    "FoldError",
    "FoldScheme",
    "FoldSpec",
    "FormatError",
    "FpSearchError",
    "GaussianFit",
    "Hit",
    "HnswIndex",
    "HnswParams",
    "IndexStateError",
    "InsertError",
    "MergeResult",
    "ParameterError",
    "ParseError",
    "PlatformSpec",
    "QueueUnderflow",
    "ScoredEntry",
    "TanimotoScore",
    "TopKResult",
    "build_bitbound",
    "build_hnsw",
    "cost_report",
    "expected_speedup",
    "fit_gaussian",
    "fixed12",
    "fold",
    "ingest",
    "k_first_round",
    "kernel_bandwidth",
    "max_kernels",
    "mean_pruned_fraction",
    "merge_cost",
    "merge_topk_stream",
    "model_table",
    "parse_fps",
    "popcount",
    "pq_cost",
    "prune_range",
    "pruned_fraction",
    "read_bitbound",
    "read_hnsw",
    "save_bitbound",
    "save_hnsw",
    "search_bitbound",
    "search_bruteforce",
    "search_two_stage",
    "synthesize",
    "tanimoto",
    "throughput_qps",
    "write_fps",
]
