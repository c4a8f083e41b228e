"""Recall / throughput benchmark over parameter grids.

Recall of a result is ``|result & oracle| / |oracle|`` where the oracle is
the brute-force top-k under the same ranking order and, for cutoff
searches, the same cutoff filter.  Throughput is measured single query at
a time.  With ``clock="model"`` the wall clock is replaced by the
one-entry-per-cycle hardware model (scanned entries / kernel frequency),
which makes every emitted number reproducible.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data import ingest, synthesize
from .errors import FpSearchError, ParameterError
from .exact import (
    FingerprintSet,
    as_cutoff,
    build_bitbound,
    search_bitbound,
    search_bruteforce,
    search_two_stage,
)
from .fingerprint import Fingerprint, FoldSpec
from .hnsw import HnswParams, build_hnsw
from .results import TopKResult

log = logging.getLogger(__name__)

ALGORITHMS = ("brute", "bitbound", "two_stage", "hnsw")
DEFAULT_HNSW_M_GRID = (5, 10, 15, 20, 25, 30, 35, 40, 45, 50)
DEFAULT_EF_GRID = (20, 40, 60, 80, 100, 120, 140, 160, 180, 200)
MODEL_CLOCK_HZ = 450e6


@dataclass
class SynthSpec:
    n: int = 10_000
    length: int = 1024
    mu: float = 47.5
    sigma: float = 12.2
    seed: int = 0
    profile_amplitude: float = 0.0
    family_size: int = 1
    keep: float = 0.7

    def generate(self) -> list[Fingerprint]:
        return synthesize(
            self.n, self.length, self.mu, self.sigma, self.seed,
            profile_amplitude=self.profile_amplitude,
            family_size=self.family_size, keep=self.keep,
        )


@dataclass
class BenchConfig:
    algorithm: str = "brute"
    dataset: str | None = None
    synth: SynthSpec = field(default_factory=SynthSpec)
    k: int = 20
    n_queries: int = 100
    query_seed: int = 1
    query_path: str | None = None
    cutoffs: list[float | None] = field(default_factory=lambda: [0.8])
    fold_ms: list[int] = field(default_factory=lambda: [1, 2, 4, 8])
    fold_schemes: list[str] = field(default_factory=lambda: ["sectioned"])
    hnsw_ms: list[int] = field(default_factory=lambda: [16])
    efs: list[int] = field(default_factory=lambda: list(DEFAULT_EF_GRID))
    ef_construction: int = 200
    seed: int = 0
    repeat: int = 3
    threads: int = 1
    clock: str = "wall"

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ParameterError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.k < 1 or self.n_queries < 1 or self.repeat < 1 or self.threads < 1:
            raise ParameterError("k, query count, repeat and threads must be positive")
        if self.clock not in ("wall", "model"):
            raise ParameterError(f"clock must be 'wall' or 'model', got {self.clock!r}")
        grids = {
            "bitbound": [self.cutoffs],
            "two_stage": [self.fold_ms, self.fold_schemes, self.cutoffs],
            "hnsw": [self.hnsw_ms, self.efs],
        }.get(self.algorithm, [])
        if any(len(g) == 0 for g in grids):
            raise ParameterError("parameter grids must be non-empty")
        if self.algorithm == "bitbound" and None in self.cutoffs:
            raise ParameterError("bitbound needs a numeric cutoff")
        if self.algorithm == "hnsw" and self.k > max(self.efs):
            raise ParameterError(f"k ({self.k}) exceeds the largest ef ({max(self.efs)})")


@dataclass
class BenchRecord:
    algorithm: str
    params: dict
    recall: float
    qps: float
    wall_ns: int
    evals: float = 0.0
    pareto: bool = False

    def sort_key(self) -> tuple:
        return (self.algorithm, json.dumps(self.params, sort_keys=True))


def pareto_flags(points: Sequence[tuple[float, float]]) -> list[bool]:
    """True where no other point is at least as good on both axes and better on one."""
    flags = []
    for i, (r, q) in enumerate(points):
        dominated = any(
            r2 >= r and q2 >= q and (r2 > r or q2 > q)
            for j, (r2, q2) in enumerate(points) if j != i
        )
        flags.append(not dominated)
    return flags


def mark_pareto(records: list[BenchRecord]) -> list[BenchRecord]:
    for rec, flag in zip(records, pareto_flags([(r.recall, r.qps) for r in records])):
        rec.pareto = flag
    return records


# -- record files -------------------------------------------------------------

CSV_FIELDS = ("algorithm", "params", "recall", "qps", "wall_ns", "evals", "pareto")


def write_records_csv(records: Sequence[BenchRecord], path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in records:
            w.writerow([
                r.algorithm, json.dumps(r.params, sort_keys=True, separators=(",", ":")),
                repr(float(r.recall)), repr(float(r.qps)), int(r.wall_ns),
                repr(float(r.evals)), "true" if r.pareto else "false",
            ])


def read_records_csv(path: str | os.PathLike) -> list[BenchRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [
        BenchRecord(
            algorithm=row["algorithm"], params=json.loads(row["params"]),
            recall=float(row["recall"]), qps=float(row["qps"]), wall_ns=int(row["wall_ns"]),
            evals=float(row["evals"]), pareto=row["pareto"] == "true",
        )
        for row in rows
    ]


def write_records_json(records: Sequence[BenchRecord], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([asdict(r) for r in records], fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_records_json(path: str | os.PathLike) -> list[BenchRecord]:
    with open(path, encoding="utf-8") as fh:
        return [BenchRecord(**row) for row in json.load(fh)]


# -- running ------------------------------------------------------------------

_ORACLE_CACHE: dict[tuple, list[list[int]]] = {}


def recall_at_k(found: Sequence[int], oracle: Sequence[int]) -> float:
    if not oracle:
        return 1.0
    return len(set(found) & set(oracle)) / len(oracle)


def draw_queries(db: Sequence[Fingerprint], n_queries: int, seed: int) -> list[Fingerprint]:
    rng = np.random.default_rng(seed)
    n = min(n_queries, len(db))
    picks = np.sort(rng.choice(len(db), size=n, replace=False))
    return [db[int(i)] for i in picks]


def oracle_ids(
    packed: FingerprintSet, queries: Sequence[Fingerprint], k: int,
    cutoff: float | None = None, cache_key: tuple | None = None,
) -> list[list[int]]:
    key = None if cache_key is None else cache_key + (k, None if cutoff is None else as_cutoff(cutoff))
    if key is not None and key in _ORACLE_CACHE:
        return _ORACLE_CACHE[key]
    sc = None if cutoff is None else as_cutoff(cutoff)
    out = []
    for q in queries:
        hits = search_bruteforce(packed, q, k).hits
        if sc is not None:
            hits = [h for h in hits if h.score.union and h.score.exact >= sc]
        out.append([h.id for h in hits])
    if key is not None:
        _ORACLE_CACHE[key] = out
    return out


def _time_queries(search: Callable[[Fingerprint], TopKResult], queries, repeat: int, threads: int):
    timings = []
    results: list[TopKResult] = []
    for _ in range(repeat):
        start = time.perf_counter_ns()
        if threads == 1:
            results = [search(q) for q in queries]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(search, queries))
        timings.append(time.perf_counter_ns() - start)
    return results, statistics.median(timings)


def _grid(cfg: BenchConfig):
    if cfg.algorithm == "brute":
        yield {}
    elif cfg.algorithm == "bitbound":
        for sc in cfg.cutoffs:
            yield {"cutoff": sc}
    elif cfg.algorithm == "two_stage":
        for m in cfg.fold_ms:
            for scheme in cfg.fold_schemes:
                for sc in cfg.cutoffs:
                    yield {"m": m, "scheme": scheme, "cutoff": sc}
    else:
        for M in cfg.hnsw_ms:
            for ef in cfg.efs:
                if ef >= cfg.k:
                    yield {"M": M, "ef": ef}


def load_database(cfg: BenchConfig) -> tuple[list[Fingerprint], tuple]:
    if cfg.dataset:
        return ingest(cfg.dataset), ("file", os.path.abspath(cfg.dataset))
    return cfg.synth.generate(), ("synth",) + tuple(asdict(cfg.synth).values())


def run_bench(
    cfg: BenchConfig, db: list[Fingerprint] | None = None,
    queries: list[Fingerprint] | None = None,
) -> list[BenchRecord]:
    cfg.validate()
    data_key: tuple | None = None
    if db is None:
        db, data_key = load_database(cfg)
    if not db:
        raise ParameterError("database is empty")
    if queries is None:
        if cfg.query_path:
            queries = ingest(cfg.query_path)
            query_key = ("file", os.path.abspath(cfg.query_path))
        else:
            queries = draw_queries(db, cfg.n_queries, cfg.query_seed)
            query_key = ("drawn", cfg.query_seed, cfg.n_queries)
    else:
        data_key = query_key = None
    cache_key = None if data_key is None else data_key + query_key
    packed = FingerprintSet.from_fingerprints(db)

    indexes: dict = {}
    records = []
    for point in _grid(cfg):
        try:
            search = _searcher(cfg, db, packed, point, indexes)
            results, elapsed = _time_queries(search, queries, cfg.repeat, cfg.threads)
        except FpSearchError as exc:
            raise type(exc)(f"{cfg.algorithm} {point}: {exc}") from exc
        oracle = oracle_ids(packed, queries, cfg.k, point.get("cutoff"), cache_key)
        recall = float(np.mean([recall_at_k(r.ids, o) for r, o in zip(results, oracle)]))
        evals = float(np.mean([r.evaluations for r in results]))
        if cfg.clock == "model":
            per_query_s = max(evals, 1.0) / MODEL_CLOCK_HZ
        else:
            per_query_s = elapsed / 1e9 / len(queries)
        records.append(BenchRecord(
            algorithm=cfg.algorithm, params=dict(point, k=cfg.k, threads=cfg.threads),
            recall=recall, qps=1.0 / per_query_s, wall_ns=int(round(per_query_s * 1e9)),
            evals=evals,
        ))
        log.info("%s %s recall=%.4f qps=%.1f", cfg.algorithm, point, recall, 1.0 / per_query_s)
    records.sort(key=BenchRecord.sort_key)
    return mark_pareto(records)


def _searcher(cfg: BenchConfig, db, packed, point: dict, indexes: dict):
    k = cfg.k
    if cfg.algorithm == "brute":
        return lambda q: search_bruteforce(packed, q, k)
    if cfg.algorithm == "bitbound":
        idx = indexes.setdefault("bitbound", build_bitbound(packed))
        sc = point["cutoff"]
        return lambda q: search_bitbound(idx, q, k, sc)
    if cfg.algorithm == "two_stage":
        key = ("fold", point["m"], point["scheme"])
        if key not in indexes:
            indexes[key] = build_bitbound(packed, FoldSpec(point["scheme"], point["m"]))
        idx, sc = indexes[key], point["cutoff"]
        return lambda q: search_two_stage(idx, q, k, sc)
    key = ("hnsw", point["M"])
    if key not in indexes:
        order = np.random.default_rng(cfg.seed).permutation(len(db))
        params = HnswParams(M=point["M"], ef_construction=max(cfg.ef_construction, point["M"]),
                            ef_search=point["ef"], seed=cfg.seed)
        indexes[key] = build_hnsw((db[int(i)] for i in order), params, packed.length)
    g, ef = indexes[key], point["ef"]
    return lambda q: g.search(q, k, ef)
