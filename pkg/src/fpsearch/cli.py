"""Command line: synth, build, search, bench, model, pareto.

Exit status is 0 on success, 2 for bad input or configuration and 3 for
failures while running (including a failing acceptance suite).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path

from . import acceptance
from .bench import (
    DEFAULT_EF_GRID,
    BenchConfig,
    SynthSpec,
    mark_pareto,
    read_records_csv,
    read_records_json,
    run_bench,
    write_records_csv,
    write_records_json,
)
from .cost import REFERENCE_DB_SIZE, PlatformSpec, cost_report, topk_report
from .data import ingest, parse_fps, write_fps
from .errors import (
    BuildError,
    DimensionError,
    FitError,
    FoldError,
    FormatError,
    FpSearchError,
    ParameterError,
    ParseError,
)
from .exact import (
    build_bitbound,
    load_bitbound,
    save_bitbound,
    search_bitbound,
    search_bruteforce,
    search_two_stage,
)
from .fingerprint import Fingerprint, FoldSpec
from .hnsw import HnswParams, build_hnsw, load_hnsw, save_hnsw
from .model import GaussianFit, fit_gaussian, model_table

log = logging.getLogger("fpsearch")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
CONFIG_ERRORS = (ParseError, ParameterError, FormatError, DimensionError, FoldError,
                 BuildError, FitError, FileNotFoundError, IsADirectoryError)


class ConfigError(Exception):
    pass


def _cutoff(text: str):
    if text.lower() == "none":
        return None
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid cutoff {text!r}") from None


@contextmanager
def _output(path: str | None, mode: str = "w"):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, mode, encoding="utf-8", newline="") as fh:
            yield fh


def _require_data(fps: list[Fingerprint], source: str) -> list[Fingerprint]:
    if not fps:
        raise ConfigError(f"{source} contains no fingerprints")
    return fps


def _add_synth_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--length", type=int, default=1024)
    p.add_argument("--mu", type=float, default=47.5)
    p.add_argument("--sigma", type=float, default=12.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile-amplitude", type=float, default=0.0,
                   help="skew of the bit-position profile (0 = uniform)")
    p.add_argument("--family-size", type=int, default=1,
                   help="mean analog-series size (1 = independent fingerprints)")
    p.add_argument("--keep", type=float, default=0.7,
                   help="share of bits inherited from the series prototype")


def _synth_spec(args) -> SynthSpec:
    return SynthSpec(n=args.n, length=args.length, mu=args.mu, sigma=args.sigma, seed=args.seed,
                     profile_amplitude=args.profile_amplitude, family_size=args.family_size,
                     keep=args.keep)


# -- subcommands ----------------------------------------------------------------


def cmd_synth(args) -> int:
    fps = _synth_spec(args).generate()
    with _output(args.out) as fh:
        write_fps(fps, fh)
    log.info("wrote %d fingerprints", len(fps))
    return EXIT_OK


def _build(args, fps: list[Fingerprint]):
    if args.algo in ("brute", "bitbound"):
        return build_bitbound(fps)
    if args.algo == "two_stage":
        return build_bitbound(fps, FoldSpec(args.fold_scheme, args.fold_m))
    params = HnswParams(M=args.hnsw_m, ef_construction=args.ef_construction,
                        ef_search=args.ef, seed=args.seed)
    return build_hnsw(fps, params)


def cmd_build(args) -> int:
    fps = _require_data(ingest(args.input), args.input)
    index = _build(args, fps)
    if args.algo == "hnsw":
        save_hnsw(index, args.out)
    else:
        save_bitbound(index, args.out)
    log.info("built %s index over %d fingerprints -> %s", args.algo, len(fps), args.out)
    return EXIT_OK


def _load_index(path: str):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        fh.seek(0)
        if magic == b"MSKB":
            return load_bitbound(fh)
        if magic == b"MSKH":
            return load_hnsw(fh)
    raise FormatError(f"{path}: unknown index format {magic!r}")


def cmd_search(args) -> int:
    if args.index:
        index = _load_index(args.index)
    elif args.input:
        index = _build(args, _require_data(ingest(args.input), args.input))
    else:
        raise ConfigError("search needs --index or --input")
    if args.query_hex:
        queries = parse_fps([h for h in args.query_hex])
    elif args.query:
        queries = ingest(args.query)
    else:
        raise ConfigError("search needs --query or --query-hex")

    rows = []
    for qn, q in enumerate(queries):
        if hasattr(index, "search"):
            res = index.search(q, args.k, max(args.ef, args.k))
        elif args.algo == "brute" or (args.cutoff is None and index.fold_spec is None):
            res = search_bruteforce(index, q, args.k)
        elif index.fold_spec is not None and args.algo != "bitbound":
            res = search_two_stage(index, q, args.k, args.cutoff)
        else:
            if args.cutoff is None:
                raise ConfigError("bitbound search needs --cutoff")
            res = search_bitbound(index, q, args.k, args.cutoff)
        for rank, hit in enumerate(res.hits):
            rows.append({"query": q.id if args.query else qn, "rank": rank, "id": hit.id,
                         "score": hit.score.value, "intersection": hit.score.intersection,
                         "union": hit.score.union, "fixed12": hit.score.fixed12})
    with _output(args.out) as fh:
        if args.format == "json":
            json.dump(rows, fh, indent=2)
            fh.write("\n")
        else:
            w = csv.DictWriter(fh, fieldnames=["query", "rank", "id", "score", "intersection",
                                               "union", "fixed12"], lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.suite:
        results = acceptance.run_suite(args.only or None)
        if args.out:
            Path(args.out).write_text(json.dumps([r.to_dict() for r in results], indent=2,
                                                 default=str) + "\n")
        return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME
    cfg = BenchConfig(
        algorithm=args.algo, dataset=args.input, synth=_synth_spec(args), k=args.k,
        n_queries=args.queries, query_seed=args.query_seed, query_path=args.query,
        cutoffs=args.cutoff, fold_ms=args.fold_m, fold_schemes=args.fold_scheme,
        hnsw_ms=args.hnsw_m, efs=args.ef, ef_construction=args.ef_construction,
        seed=args.seed, repeat=args.repeat, threads=args.threads, clock=args.clock,
    )
    records = run_bench(cfg)
    _emit_records(records, args.out, args.format)
    return EXIT_OK


def _emit_records(records, out: str | None, fmt: str) -> None:
    if out is None:
        for r in records:
            print(f"{r.algorithm}\t{json.dumps(r.params, sort_keys=True)}\trecall={r.recall:.4f}"
                  f"\tqps={r.qps:.1f}\tpareto={r.pareto}")
        return
    stem = Path(out)
    if stem.suffix in (".csv", ".json"):
        (write_records_json if stem.suffix == ".json" else write_records_csv)(records, stem)
        return
    if fmt in ("csv", "both"):
        write_records_csv(records, stem.with_suffix(".csv"))
    if fmt in ("json", "both"):
        write_records_json(records, stem.with_suffix(".json"))


def cmd_model(args) -> int:
    if args.kind == "analytic":
        if args.input:
            fit = fit_gaussian(fp.bit_count for fp in _require_data(ingest(args.input), args.input))
        else:
            fit = GaussianFit(args.mu, args.sigma)
        with _output(args.out) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["Sc", "pruned_fraction", "speedup"])
            for sc, r, s in model_table(fit, args.cutoff):
                w.writerow([repr(sc), repr(r), repr(s)])
        return EXIT_OK
    if args.kind == "cost":
        spec = PlatformSpec(kernel_freq_Hz=args.freq, bandwidth_cap_GBs=args.bandwidth_cap,
                            fingerprint_bits=args.length)
        reports = [cost_report(spec, m, args.db_size, args.pruned).to_dict() for m in args.fold_m]
    else:
        reports = [topk_report(k, args.db_size) for k in args.k]
    with _output(args.out) as fh:
        json.dump(reports, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def _read_records(path: str):
    return read_records_json(path) if path.endswith(".json") else read_records_csv(path)


def cmd_pareto(args) -> int:
    records = [r for path in args.input for r in _read_records(path)]
    mark_pareto(records)
    if args.front_only:
        records = [r for r in records if r.pareto]
    _emit_records(records, args.out, args.format)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fpsearch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic fingerprint file")
    _add_synth_args(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_synth)

    def index_args(p, default_algo):
        p.add_argument("--algo", choices=["brute", "bitbound", "two_stage", "hnsw"], default=default_algo)
        p.add_argument("--fold-m", type=int, default=4)
        p.add_argument("--fold-scheme", choices=["sectioned", "adjacent"], default="sectioned")
        p.add_argument("--hnsw-m", type=int, default=16)
        p.add_argument("--ef-construction", type=int, default=200)
        p.add_argument("--ef", type=int, default=50)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("build", help="build and save an index")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    index_args(p, "bitbound")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("search", help="query a saved or freshly built index")
    p.add_argument("--index")
    p.add_argument("--input")
    p.add_argument("--query")
    p.add_argument("--query-hex", nargs="+")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--cutoff", type=_cutoff, default=None)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", default="-")
    index_args(p, "bitbound")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("bench", help="recall/QPS grid or the acceptance suite")
    p.add_argument("--suite", choices=["acceptance"])
    p.add_argument("--only", type=int, nargs="+", help="criterion numbers to run with --suite")
    p.add_argument("--algo", choices=["brute", "bitbound", "two_stage", "hnsw"], default="brute")
    p.add_argument("--input", help="fingerprint file; synthesised when omitted")
    _add_synth_args(p)
    p.add_argument("--query", help="query fingerprint file; drawn from the database when omitted")
    p.add_argument("--queries", type=int, default=100)
    p.add_argument("--query-seed", type=int, default=1)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--cutoff", type=_cutoff, nargs="+", default=[0.8])
    p.add_argument("--fold-m", type=int, nargs="+", default=[1, 2, 4, 8])
    p.add_argument("--fold-scheme", choices=["sectioned", "adjacent"], nargs="+", default=["sectioned"])
    p.add_argument("--hnsw-m", type=int, nargs="+", default=[16])
    p.add_argument("--ef", type=int, nargs="+", default=list(DEFAULT_EF_GRID))
    p.add_argument("--ef-construction", type=int, default=200)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--clock", choices=["wall", "model"], default="wall")
    p.add_argument("--format", choices=["csv", "json", "both"], default="both")
    p.add_argument("--out", help="output stem, or a .csv/.json path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("model", help="analytic pruning model, cost model or top-k engine costs")
    p.add_argument("--kind", choices=["analytic", "cost", "topk"], default="analytic")
    p.add_argument("--input", help="fit the Gaussian to this fingerprint file")
    p.add_argument("--mu", type=float, default=47.5)
    p.add_argument("--sigma", type=float, default=12.2)
    p.add_argument("--cutoff", type=float, nargs="+",
                   default=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95])
    p.add_argument("--fold-m", type=int, nargs="+", default=[1, 2, 4, 8, 16, 32])
    p.add_argument("--db-size", type=int, default=REFERENCE_DB_SIZE)
    p.add_argument("--pruned", type=float, default=0.0, help="mean pruned fraction for QPS")
    p.add_argument("--freq", type=float, default=450e6)
    p.add_argument("--bandwidth-cap", type=float, default=410.0)
    p.add_argument("--length", type=int, default=1024)
    p.add_argument("--k", type=int, nargs="+", default=[16, 64, 256, 1024])
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("pareto", help="recompute Pareto flags over bench record files")
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--front-only", action="store_true")
    p.add_argument("--format", choices=["csv", "json", "both"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_pareto)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, *CONFIG_ERRORS) as exc:
        print(f"fpsearch {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FpSearchError, OSError, RuntimeError) as exc:
        print(f"fpsearch {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
