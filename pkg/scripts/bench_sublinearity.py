#!/usr/bin/env python3
"""Median probes per AIFP query across dataset sizes, with the b schedule that drives it."""

import argparse
import math

from rangeagg.bd import derive_bd_params
from rangeagg.caifp import peel_factor
from rangeagg.cli import sublinearity
from rangeagg.core import GlobalConfig
from rangeagg.lsh import make_sensitive_family


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="500,1000,2000,4000")
    ap.add_argument("--queries", type=int, default=15)
    ap.add_argument("--seed", type=int, default=13)
    ap.add_argument("--b-offset", type=int, default=None)
    args = ap.parse_args()
    config = GlobalConfig(seed=args.seed)
    if args.b_offset is not None:
        config = GlobalConfig(seed=args.seed, b_offset=args.b_offset)
    sizes = [int(s) for s in args.sizes.split(",")]
    acc = min(config.eps, config.gamma) / 2
    xi = peel_factor(acc, acc)
    fam = make_sensitive_family(1.0, 1.0 + xi, config.kappa)
    print(f"{'n':>6} {'b':>3} {'c':>8} {'median':>10} {'per point':>10} {'s/query':>8}")
    for row in sublinearity(sizes, args.queries, config, seed=args.seed):
        bd = derive_bd_params(xi, row["n"], fam.p1, fam.p2, "practical")
        b = max(1, bd.b + config.b_offset)
        print(f"{row['n']:>6} {b:>3} {bd.c:>8} {row['median_probes']:>10.0f} {row['ratio']:>10.2f} "
              f"{row['seconds_per_query']:>8.2f}")
    print(f"(b grows by one each time n passes a power of 12: {[12**k for k in range(2, 5)]}; "
          f"log_12 of the sizes: {[round(math.log(s, 12), 2) for s in sizes]})")


if __name__ == "__main__":
    main()
