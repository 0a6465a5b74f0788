"""Command-line entry point: gen, workload, build, query, validate, bench.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 capacity refusal.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import binomtest

from rangeagg.bd import CapacityError, build_boosted, overrides_from
from rangeagg.caifp import peel_factor
from rangeagg.core import Ball, GlobalConfig, RngStream
from rangeagg.datasets import DISTRIBUTIONS, generate, make_workload
from rangeagg.io import (
    DataError,
    IndexBundle,
    QueryRecord,
    build_bundle,
    load_dataset,
    load_index,
    parse_record,
    save_dataset,
    save_index,
    write_workload,
)
from rangeagg.oracle import ValidityReport, brute_bd, valid_aifp, valid_ameb

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CAPACITY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("index parameters")
    g.add_argument("--profile", choices=("theory", "practical"), default="practical")
    g.add_argument("--eps", type=float, default=0.3)
    g.add_argument("--gamma", type=float, default=0.3)
    g.add_argument("--delta", type=float, default=0.2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--lambda-override", type=float, default=None)
    g.add_argument("--a-override", type=int, default=None)
    g.add_argument("--c-multiplier", type=float, default=4.0)
    g.add_argument("--b-offset", type=int, default=-1, help="practical only: shift of the BD block count b")


def _config(args) -> GlobalConfig:
    return GlobalConfig(
        eps=args.eps, gamma=args.gamma, delta=args.delta, profile=args.profile, seed=args.seed,
        lambda_override=args.lambda_override, a_override=args.a_override, c_multiplier=args.c_multiplier,
        b_offset=args.b_offset,
    )


# -- query dispatch ----------------------------------------------------------------


@dataclass
class Outcome:
    index: int
    record: QueryRecord | None
    answer: object = None  # point id, Ball, or None
    probes: int = 0
    seconds: float = 0.0
    error: str | None = None

    def to_json(self) -> dict:
        out = {"index": self.index}
        if self.error is not None:
            out["error"] = self.error
            return out
        out["kind"] = self.record.kind
        if isinstance(self.answer, Ball):
            out["answer"] = {"center": self.answer.center.tolist(), "radius": self.answer.radius}
        else:
            out["answer"] = self.answer
        out["probes"] = self.probes
        out["seconds"] = round(self.seconds, 6)
        return out


def record_stream(bundle: IndexBundle, rec: QueryRecord, index: int) -> RngStream:
    """Per-record randomness from (global seed, record index, record seed)."""
    return RngStream(bundle.config.seed, ("query", index, rec.seed))


def run_record(bundle: IndexBundle, rec: QueryRecord, index: int) -> Outcome:
    rng = record_stream(bundle, rec, index)
    ball = Ball(rec.center, rec.radius)
    t0 = time.perf_counter()
    if rec.kind == "aifp":
        res = bundle.aifp.query(ball, rec.q, rng)
        answer, probes = res.point, res.probes
    elif rec.kind == "ameb":
        res = bundle.ameb.query(ball, rng)
        answer, probes = res.ball, res.probes
    else:
        cfg = bundle.config
        xi = peel_factor(cfg.eps, cfg.gamma)
        bd = build_boosted(bundle.points, xi, rec.radius, rec.out_radius, cfg.delta, rng.child("index"), cfg.profile,
                           overrides_from(cfg), cfg.kappa)
        gen = rng.generator()
        answer, probes = None, 0
        for idx in bd:
            r = idx.query(ball, Ball(rec.out_center, rec.out_radius), gen)
            probes += r.probes
            if r.point is not None:
                answer = r.point
                break
    return Outcome(index, rec, answer, probes, time.perf_counter() - t0)


def _read_records(path, d: int) -> list[tuple[int, QueryRecord | None, str | None]]:
    fh = sys.stdin if path == "-" else open(path)
    out = []
    with fh:
        for i, line in enumerate(l for l in fh if l.strip()):
            try:
                out.append((i, parse_record(line, d), None))
            except DataError as e:
                out.append((i, None, str(e)))
    return out


def _run_all(bundle: IndexBundle, records, threads: int) -> list[Outcome]:
    def one(item):
        i, rec, err = item
        if rec is None:
            return Outcome(i, None, error=err)
        return run_record(bundle, rec, i)

    if threads <= 1:
        return [one(r) for r in records]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(one, records))  # map keeps record order


# -- commands ----------------------------------------------------------------------


def cmd_gen(args) -> int:
    coords = generate(args.n, args.d, args.distribution, args.seed, args.k, args.sigma)
    save_dataset(args.out, coords, args.format)
    print(json.dumps({"out": args.out, "n": args.n, "d": args.d, "distribution": args.distribution}))
    return EXIT_OK


def cmd_workload(args) -> int:
    pts = load_dataset(args.dataset)
    kinds = tuple(args.kinds.split(","))
    for k in kinds:
        if k not in ("aifp", "ameb", "bd"):
            raise DataError(f"unknown record kind {k!r}")
    recs = make_workload(pts, args.count, args.seed, kinds, (args.r_min, args.r_max))
    write_workload(args.out, recs)
    print(json.dumps({"out": args.out, "records": len(recs)}))
    return EXIT_OK


def cmd_build(args) -> int:
    pts = load_dataset(args.dataset)
    t0 = time.perf_counter()
    bundle = build_bundle(pts, _config(args))
    built = time.perf_counter() - t0
    save_index(args.out, bundle)
    ms = bundle.aifp.multi
    p = bundle.aifp.params
    print(json.dumps({
        "out": args.out, "n": pts.n, "d": pts.d, "build_seconds": round(built, 3),
        "lambda": p.lam, "Gamma": p.gamma_total, "t_range": ms.t_range,
        "bucket_memberships": int(ms.table.total_memberships()),
    }))
    return EXIT_OK


def cmd_query(args) -> int:
    bundle = load_index(args.manifest)
    for out in _run_all(bundle, _read_records(args.workload, bundle.points.d), args.threads):
        print(json.dumps(out.to_json()), flush=True)
    return EXIT_OK


def wilson(successes: int, trials: int) -> tuple[float, float]:
    if trials == 0:
        return (0.0, 1.0)
    ci = binomtest(successes, trials).proportion_ci(0.95, method="wilson")
    return (float(ci.low), float(ci.high))


def validate_outcomes(bundle: IndexBundle, outcomes: list[Outcome]) -> dict:
    pts = bundle.points.coords
    cfg = bundle.config
    total = valid = nonnull = nonnull_valid = 0
    probes = []
    failures = []
    for o in outcomes:
        if o.error is not None or o.record is None:
            continue
        rec, ball = o.record, Ball(o.record.center, o.record.radius)
        if rec.kind == "aifp":
            rep = valid_aifp(o.answer, rec.q, ball, pts, cfg.eps, cfg.gamma)
        elif rec.kind == "ameb":
            rep = valid_ameb(o.answer, ball, pts, cfg.eps, cfg.gamma)
        else:
            ok = o.answer is not None or brute_bd(pts, ball, Ball(rec.out_center, rec.out_radius)) is None
            rep = ValidityReport(ok, "" if ok else "NULL but the difference is non-empty")
        total += 1
        valid += bool(rep.verdict)
        probes.append(o.probes)
        if o.answer is not None:
            nonnull += 1
            nonnull_valid += bool(rep.verdict)
        if not rep.verdict:
            failures.append({"index": o.index, "reason": rep.reason})
    lo, hi = wilson(valid, total)
    return {
        "records": total,
        "success_rate": valid / total if total else None,
        "success_ci95": [lo, hi],
        "non_null": nonnull,
        "conditional_validity": nonnull_valid / nonnull if nonnull else None,
        "probes_median": float(np.median(probes)) if probes else None,
        "probes_max": int(max(probes)) if probes else None,
        "failures": failures,
    }


def cmd_validate(args) -> int:
    bundle = load_index(args.manifest)
    pts = load_dataset(args.dataset)
    if pts.fingerprint() != bundle.points.fingerprint():
        raise DataError("dataset fingerprint does not match the manifest")
    records = [r for r in _read_records(args.workload, pts.d) if r[1] is not None]
    records = records[: args.trials] if args.trials is not None else records
    report = validate_outcomes(bundle, _run_all(bundle, records, args.threads))
    print(json.dumps(report, indent=2))
    return EXIT_OK


def sublinearity(sizes, queries: int, config: GlobalConfig, seed: int = 0, d: int = 16) -> list[dict]:
    """Median AIFP probe count per query on gaussian-cluster data of each size."""
    rows = []
    for n in sizes:
        coords = generate(n, d, "gaussian-clusters", seed)
        bundle = build_bundle(coords, config)
        recs = make_workload(coords, queries, seed + 1, ("aifp",), (1.0, 4.0), far_fraction=0.0)
        t0 = time.perf_counter()
        outs = [run_record(bundle, r, i) for i, r in enumerate(recs)]
        med = float(np.median([o.probes for o in outs]))
        rows.append({"n": n, "median_probes": med, "ratio": med / n,
                     "seconds_per_query": (time.perf_counter() - t0) / max(1, queries)})
    return rows


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    rows = sublinearity(sizes, args.queries, _config(args), args.data_seed, args.d)
    for r in rows:
        print(json.dumps(r))
    ratios = [r["ratio"] for r in rows]
    print(json.dumps({"ratio_strictly_decreasing": all(b < a for a, b in zip(ratios, ratios[1:]))}))
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rangeagg", description="Approximate range-aggregate queries (AIFP, AMEB) over point sets.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--distribution", choices=DISTRIBUTIONS, default="uniform-cube")
    g.add_argument("--k", type=int, default=8, help="clusters (gaussian-clusters)")
    g.add_argument("--sigma", type=float, default=0.5, help="cluster spread (gaussian-clusters)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--format", choices=("auto", "text", "bin"), default="auto")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    w = sub.add_parser("workload", help="generate seeded query records for a dataset")
    w.add_argument("dataset")
    w.add_argument("--count", type=int, default=100)
    w.add_argument("--kinds", default="aifp", help="comma-separated subset of aifp,ameb,bd")
    w.add_argument("--r-min", type=float, default=0.5)
    w.add_argument("--r-max", type=float, default=4.0)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_workload)

    b = sub.add_parser("build", help="build an index and write its manifest")
    b.add_argument("dataset")
    b.add_argument("--out", required=True)
    _config_flags(b)
    b.set_defaults(func=cmd_build)

    for name, func, helptext in (("query", cmd_query, "answer a workload"),
                                 ("validate", cmd_validate, "answer and check a workload against the oracles")):
        q = sub.add_parser(name, help=helptext)
        q.add_argument("manifest")
        if name == "validate":
            q.add_argument("dataset")
        q.add_argument("workload", help="JSON-lines records, or - for stdin")
        if name == "validate":
            q.add_argument("--trials", type=int, default=None, help="use only the first N records")
        q.add_argument("--threads", type=int, default=1)
        q.set_defaults(func=func)

    s = sub.add_parser("bench", help="probe counts per query across dataset sizes")
    s.add_argument("--sizes", default="500,1000,2000,4000")
    s.add_argument("--queries", type=int, default=15)
    s.add_argument("--d", type=int, default=16)
    s.add_argument("--data-seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=1)
    _config_flags(s)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # usage errors and --help
        return int(e.code or 0)
    try:
        return args.func(args)
    except CapacityError as e:
        print(f"capacity refusal: {e}", file=sys.stderr)
        return EXIT_CAPACITY
    except (DataError, FileNotFoundError, IsADirectoryError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
