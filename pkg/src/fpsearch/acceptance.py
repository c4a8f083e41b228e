"""End-to-end acceptance checks, runnable from the CLI or pytest.

Every check compares the library against an independent oracle written
here with plain Python ints, ``fractions``, ``heapq`` and fixed-grid numpy
quadrature, and reports pass/fail with its measured runtime.
"""

from __future__ import annotations

import heapq
import io
import math
import os
import random
import tempfile
import time
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .bench import BenchConfig, SynthSpec, draw_queries, recall_at_k, run_bench, write_records_csv
from .cost import REFERENCE_DB_SIZE, PlatformSpec, cost_report, kernel_bandwidth, max_kernels, throughput_qps
from .data import synthesize
from .exact import (
    FingerprintSet,
    bitbound_bytes,
    build_bitbound,
    k_first_round,
    search_bitbound,
    search_bruteforce,
    search_two_stage,
)
from .fingerprint import Fingerprint, FoldScheme, FoldSpec
from .hnsw import HnswIndex, HnswParams, build_hnsw, hnsw_bytes
from .model import (
    GaussianFit,
    empirical_pruned_fraction,
    expected_speedup,
    model_table,
    pruned_fraction,
)
from .topk import BoundedPriorityQueue, ScoredEntry, merge_cost, merge_topk_stream

REFERENCE_FIT = GaussianFit(47.5, 12.2)
SPEEDUP_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95)


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    seconds: float = 0.0
    budget_s: float | None = None
    details: dict = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        budget = f" (budget {self.budget_s:.0f}s)" if self.budget_s else ""
        extra = f" :: {'; '.join(self.failures)}" if self.failures else ""
        return f"[{status}] {self.criterion}. {self.name} in {self.seconds:.1f}s{budget}{extra}"

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion, "name": self.name, "passed": self.passed,
            "seconds": self.seconds, "budget_s": self.budget_s,
            "details": self.details, "failures": self.failures,
        }


class _Check:
    def __init__(self, criterion: int, name: str, budget_s: float | None = None):
        self.result = CheckResult(criterion, name, True, budget_s=budget_s)

    def expect(self, ok: bool, message: str) -> None:
        if not ok:
            self.result.passed = False
            if len(self.result.failures) < 5:
                self.result.failures.append(message)


def _timed(criterion: int, name: str, budget_s: float | None = None):
    def wrap(fn: Callable[[_Check], None]) -> Callable[[], CheckResult]:
        def run() -> CheckResult:
            chk = _Check(criterion, name, budget_s)
            start = time.perf_counter()
            try:
                fn(chk)
            except Exception as exc:  # a crashing check is a failed check
                chk.expect(False, f"raised {exc!r}")
            chk.result.seconds = time.perf_counter() - start
            if budget_s is not None:
                chk.expect(chk.result.seconds < budget_s,
                           f"took {chk.result.seconds:.1f}s, budget {budget_s}s")
            return chk.result
        run.criterion = criterion
        return run
    return wrap


# -- independent oracles ------------------------------------------------------


def oracle_filtered_topk(db: list[Fingerprint], q: Fingerprint, k: int, cutoff) -> list[tuple[int, int, int]]:
    """Score every entry with Python ints, keep ``S >= cutoff``, rank, truncate."""
    sc = Fraction(repr(cutoff)) if isinstance(cutoff, float) else Fraction(cutoff)
    num, den = sc.numerator, sc.denominator
    kept = []
    for fp in db:
        inter = (fp.bits & q.bits).bit_count()
        union = (fp.bits | q.bits).bit_count()
        if union and inter * den >= num * union:
            kept.append((Fraction(inter, union), fp.id, inter, union))
    kept.sort(key=lambda t: (-t[0], t[1]))
    return [(fid, inter, union) for _, fid, inter, union in kept[:k]]


def oracle_topk_ids(db: list[Fingerprint], q: Fingerprint, k: int) -> list[int]:
    scored = []
    for fp in db:
        inter = (fp.bits & q.bits).bit_count()
        union = (fp.bits | q.bits).bit_count()
        scored.append((-(Fraction(inter, union) if union else Fraction(0)), fp.id))
    return [fid for _, fid in sorted(scored)[:k]]


class HeapQueueOracle:
    """Bounded priority queue on ``heapq`` with explicit worst-element eviction."""

    def __init__(self, capacity: int, polarity: str):
        self.capacity = capacity
        self.sign = -1 if polarity == "max" else 1
        self.heap: list[tuple[int, int]] = []  # keys: smaller is better

    def enqueue(self, score: int, id: int) -> None:
        heapq.heappush(self.heap, (self.sign * score, id))
        if len(self.heap) > self.capacity:
            worst = max(self.heap)
            self.heap.remove(worst)
            heapq.heapify(self.heap)

    def dequeue(self) -> tuple[int, int]:
        key, id = heapq.heappop(self.heap)
        return self.sign * key, id

    def contents(self) -> list[tuple[int, int]]:
        return [(self.sign * key, id) for key, id in sorted(self.heap)]


def trapezoid_pruned(fit: GaussianFit, c: float, cutoff: float, points: int = 200_001) -> float:
    """``1 - integral of the density over [c*Sc, c/Sc]`` on a fixed fine grid."""
    lo, hi = c * cutoff, c / cutoff
    if hi <= lo:
        return 1.0
    x = np.linspace(lo, hi, points)
    f = np.exp(-0.5 * ((x - fit.mu) / fit.sigma) ** 2) / (fit.sigma * math.sqrt(2 * math.pi))
    return 1.0 - float(np.trapezoid(f, x))


def trapezoid_speedup(fit: GaussianFit, cutoff: float, outer: int = 4001, inner: int = 2001) -> float:
    """Double fixed-grid trapezoid of the kept share over same-distribution queries."""
    c = np.linspace(fit.mu - 8 * fit.sigma, fit.mu + 8 * fit.sigma, outer)
    c = c[c > 0]
    t = np.linspace(0.0, 1.0, inner)
    lo, hi = c * cutoff, c / cutoff
    x = lo[:, None] + (hi - lo)[:, None] * t[None, :]
    dens = lambda v: np.exp(-0.5 * ((v - fit.mu) / fit.sigma) ** 2) / (fit.sigma * math.sqrt(2 * math.pi))
    kept = np.trapezoid(dens(x), t, axis=1) * (hi - lo)
    return 1.0 / float(np.trapezoid(kept * dens(c), c))


def layer0_connected(g: HnswIndex) -> bool:
    adjacency = g.layers[0]
    if not adjacency:
        return True
    start = next(iter(adjacency))
    seen = {start}
    todo = deque([start])
    while todo:
        for nb in adjacency[todo.popleft()]:
            if nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return len(seen) == len(adjacency)


# -- dataset recipes ------------------------------------------------------------

# analog series with a smooth, non-uniform bit-position profile
FOLD_DATA = dict(profile_amplitude=2.0, family_size=25, keep=0.7)


def _perturb(fp: Fingerprint, rng: random.Random, flips: int) -> Fingerprint:
    bits = fp.bits
    for _ in range(flips):
        bits ^= 1 << rng.randrange(fp.length)
    return Fingerprint(bits, fp.length, fp.id)


# -- criteria -----------------------------------------------------------------


@_timed(1, "BitBound search equals filtered brute force", budget_s=120)
def check_exactness(chk: _Check, trials: int = 1000) -> None:
    rng = random.Random(2024)
    recipes = [
        (100, {}), (1000, {}), (3000, {}), (10_000, {}),
        (100, FOLD_DATA), (1000, FOLD_DATA), (3000, FOLD_DATA), (10_000, FOLD_DATA),
    ]
    per_db = trials // len(recipes)
    done = 0
    nonempty = 0
    for seed, (n, extra) in enumerate(recipes):
        db = synthesize(n, seed=100 + seed, **extra)
        idx = build_bitbound(db)
        fresh = synthesize(per_db, seed=900 + seed, **extra)
        for t in range(per_db):
            kind = t % 4
            if kind in (0, 1):
                q = db[rng.randrange(n)]
            elif kind == 2:
                q = _perturb(db[rng.randrange(n)], rng, rng.randint(1, 8))
            else:
                q = fresh[t]
            k = rng.randint(1, 64)
            sc = rng.choice((0.3, 0.5, 0.8, 0.95))
            got = search_bitbound(idx, q, k, sc).as_tuples()
            want = oracle_filtered_topk(db, q, k, sc)
            chk.expect(got == want, f"db n={n} seed={100 + seed} trial {t}: k={k} Sc={sc}")
            nonempty += bool(want)
            done += 1
    chk.result.details.update(trials=done, nonempty_results=nonempty)
    chk.expect(done >= 1000, f"only {done} trials")


@_timed(2, "Two-stage folding recall and scheme dominance", budget_s=300)
def check_fold_recall(chk: _Check, n: int = 10_000, n_queries: int = 200, k: int = 20) -> None:
    db = synthesize(n, seed=7, **FOLD_DATA)
    queries = draw_queries(db, n_queries, seed=11)
    packed = FingerprintSet.from_fingerprints(db)
    truth = [search_bruteforce(packed, q, k).ids for q in queries]
    recalls: dict[str, dict[int, float]] = {"sectioned": {}, "adjacent": {}}
    for m in (2, 4, 8, 16):
        for scheme in FoldScheme:
            idx = build_bitbound(packed, FoldSpec(scheme, m))
            rec = [recall_at_k(search_two_stage(idx, q, k).ids, t) for q, t in zip(queries, truth)]
            recalls[scheme.value][m] = float(np.mean(rec))
    s, a = recalls["sectioned"], recalls["adjacent"]
    chk.result.details["recall"] = recalls
    for m, floor in ((2, 0.95), (4, 0.95), (8, 0.90)):
        chk.expect(s[m] >= floor, f"sectioned recall {s[m]:.4f} < {floor} at m={m}")
    for m in (2, 4, 8, 16):
        chk.expect(s[m] >= a[m], f"sectioned {s[m]:.4f} < adjacent {a[m]:.4f} at m={m}")


@_timed(3, "k_r1 / k ratios")
def check_kr1(chk: _Check) -> None:
    expected = {1: 1, 2: 4, 4: 12, 8: 32, 16: 80, 32: 192}
    got = {m: k_first_round(20, m) // 20 for m in expected}
    chk.result.details["ratios"] = got
    chk.expect(got == expected, f"got {got}")
    chk.expect(k_first_round(20, 4) == 240 and k_first_round(20, 8) == 640, "k=20 examples")


@_timed(4, "HNSW recall@20 and exhaustive-beam exactness", budget_s=600)
def check_hnsw(chk: _Check, n: int = 10_000, n_queries: int = 200, k: int = 20,
               exhaustive_queries: int = 20) -> None:
    db = synthesize(n, seed=3)
    params = HnswParams(M=20, ef_construction=200, ef_search=200, seed=0)
    order = np.random.default_rng(0).permutation(n)
    start = time.perf_counter()
    g = build_hnsw((db[int(i)] for i in order), params)
    chk.result.details["build_s"] = time.perf_counter() - start
    packed = FingerprintSet.from_fingerprints(db)
    queries = draw_queries(db, n_queries, seed=5)
    rec = [recall_at_k(g.search(q, k, 200).ids, search_bruteforce(packed, q, k).ids) for q in queries]
    recall = float(np.mean(rec))
    chk.result.details["recall@20_ef200"] = recall
    chk.expect(recall >= 0.90, f"recall@20 {recall:.4f} < 0.90")

    connected = layer0_connected(g)
    chk.result.details["layer0_connected"] = connected
    chk.expect(connected, "layer 0 is not connected")
    exact = [
        recall_at_k(g.search(q, k, n).ids, oracle_topk_ids(db, q, k))
        for q in queries[:exhaustive_queries]
    ]
    chk.result.details["recall_ef_n"] = float(np.mean(exact))
    chk.expect(all(r == 1.0 for r in exact), f"ef=n recall {np.mean(exact):.4f} != 1.0")


@_timed(5, "Top-k engines match sort and heap oracles")
def check_topk_engines(chk: _Check, traces: int = 1000) -> None:
    rng = random.Random(77)
    for t in range(traces):
        k = 1 << rng.randint(0, 6)
        n = rng.randint(0, 300)
        stream = [ScoredEntry(rng.randint(0, 4095 if t % 2 else 15), i) for i in range(n)]
        rng.shuffle(stream)
        res = merge_topk_stream(stream, k)
        want = sorted(stream, key=lambda e: (-e.score, e.id))[:k]
        chk.expect(res.entries == want, f"merge trace {t} (N={n}, k={k})")
        chk.expect(res.cycles == n + k.bit_length() - 1, f"merge cycles trace {t}")
    for t in range(traces):
        cap = rng.randint(1, 16)
        polarity = "max" if t % 2 else "min"
        pq, ref = BoundedPriorityQueue(cap, polarity), HeapQueueOracle(cap, polarity)
        for step in range(rng.randint(1, 100)):
            if ref.heap and rng.random() < 0.3:
                e = pq.dequeue()
                chk.expect((e.score, e.id) == ref.dequeue(), f"pq trace {t} dequeue at step {step}")
            else:
                score, id = rng.randint(0, 31), rng.randint(0, 50)
                pq.enqueue(ScoredEntry(score, id))
                ref.enqueue(score, id)
            chk.expect([(e.score, e.id) for e in pq.items()] == ref.contents(),
                       f"pq trace {t} contents at step {step}")
    chk.result.details["traces"] = traces


@_timed(6, "Cost formulas give the reference figures")
def check_cost(chk: _Check) -> None:
    spec = PlatformSpec()
    chk.expect(merge_cost(16) == (5, 36), f"merge_cost(16) = {merge_cost(16)}")
    chk.expect(merge_cost(1024) == (11, 2058), f"merge_cost(1024) = {merge_cost(1024)}")
    bw = kernel_bandwidth(spec, 1)
    chk.expect(bw == 57.6, f"kernel bandwidth {bw}")
    chk.expect(max_kernels(spec, 1) == 7, f"max kernels {max_kernels(spec, 1)}")
    qps = throughput_qps(spec, REFERENCE_DB_SIZE, 1, 0.0)
    chk.expect(abs(qps - 1638) / 1638 <= 0.01, f"qps {qps:.1f} not within 1% of 1638")
    chk.result.details.update(kernel_GBs=bw, kernels=max_kernels(spec, 1), qps=qps)


@_timed(7, "Analytic model vs quadrature and measurement")
def check_model(chk: _Check, n: int = 100_000, n_queries: int = 100) -> None:
    fit = REFERENCE_FIT
    worst_r = 0.0
    for c in (10, 25, 47, 60, 90):
        for sc in (0.3, 0.5, 0.8, 0.95):
            worst_r = max(worst_r, abs(pruned_fraction(fit, c, sc) - trapezoid_pruned(fit, c, sc)))
    chk.expect(worst_r <= 1e-6, f"R deviates from quadrature by {worst_r:.2e}")
    worst_s = 0.0
    speedups = []
    for sc in SPEEDUP_GRID:
        s = expected_speedup(fit, sc)
        speedups.append(s)
        worst_s = max(worst_s, abs(s - trapezoid_speedup(fit, sc)))
    chk.expect(worst_s <= 1e-6, f"speedup deviates from quadrature by {worst_s:.2e}")
    s95 = speedups[-1]
    chk.expect(s95 > 8, f"speedup at Sc=0.95 is {s95:.3f}")
    chk.expect(all(b >= a for a, b in zip(speedups, speedups[1:])), "speedup not monotone")

    db = synthesize(n, mu=fit.mu, sigma=fit.sigma, seed=21)
    idx = build_bitbound(FingerprintSet.from_fingerprints(db))
    queries = draw_queries(db, n_queries, seed=22)
    gaps = {}
    for sc in (0.3, 0.5, 0.8, 0.95):
        measured = empirical_pruned_fraction(idx, queries, sc)
        modeled = float(np.mean([pruned_fraction(fit, q.bit_count, sc) for q in queries]))
        gaps[sc] = abs(measured - modeled)
        chk.expect(gaps[sc] <= 0.05, f"Sc={sc}: measured {measured:.4f} vs model {modeled:.4f}")
    chk.result.details.update(max_R_err=worst_r, max_S_err=worst_s, speedup_095=s95,
                              speedups=dict(zip(SPEEDUP_GRID, speedups)), pruned_gaps=gaps)


def _determinism_artifacts() -> dict[str, bytes]:
    db = synthesize(2000, seed=13, **FOLD_DATA)
    out = {
        "bitbound": bitbound_bytes(build_bitbound(db)),
        "bitbound_folded": bitbound_bytes(build_bitbound(db, FoldSpec("sectioned", 4))),
        "hnsw": hnsw_bytes(build_hnsw(db, HnswParams(M=8, ef_construction=40, seed=5))),
    }
    synth = SynthSpec(n=2000, seed=13, **FOLD_DATA)
    with tempfile.TemporaryDirectory() as tmp:
        for algo, extra in (("two_stage", dict(fold_ms=[2, 4], cutoffs=[None, 0.5])),
                            ("hnsw", dict(hnsw_ms=[8], efs=[20, 40], ef_construction=40))):
            cfg = BenchConfig(algorithm=algo, synth=synth, n_queries=20, repeat=1,
                              clock="model", **extra)
            path = os.path.join(tmp, f"{algo}.csv")
            write_records_csv(run_bench(cfg), path)
            with open(path, "rb") as fh:
                out[f"bench_{algo}"] = fh.read()
    rows = model_table(REFERENCE_FIT, SPEEDUP_GRID)
    text = io.StringIO()
    for sc, r, s in rows:
        text.write(f"{sc!r},{r!r},{s!r}\n")
    text.write(cost_report().to_json())
    out["model"] = text.getvalue().encode()
    return out


@_timed(8, "Seeded runs are byte-identical")
def check_determinism(chk: _Check) -> None:
    first, second = _determinism_artifacts(), _determinism_artifacts()
    for name in first:
        chk.expect(first[name] == second[name], f"{name} differs between runs")
    chk.result.details["artifacts"] = sorted(first)


CHECKS = [check_exactness, check_fold_recall, check_kr1, check_hnsw,
          check_topk_engines, check_cost, check_model, check_determinism]
SUITE_BUDGET_S = 1200


def run_suite(only: list[int] | None = None, report: Callable[[str], None] | None = print) -> list[CheckResult]:
    results = []
    start = time.perf_counter()
    for check in CHECKS:
        if only and check.criterion not in only:
            continue
        res = check()
        results.append(res)
        if report:
            report(res.line())
    total = CheckResult(9, "Suite via one CLI invocation", True, time.perf_counter() - start,
                        budget_s=SUITE_BUDGET_S)
    if total.seconds >= SUITE_BUDGET_S:
        total.passed = False
        total.failures.append(f"suite took {total.seconds:.0f}s")
    results.append(total)
    if report:
        report(total.line())
    return results
