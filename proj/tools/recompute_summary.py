#!/usr/bin/env python3
"""Recompute per-group mean FCT and ECMP-normalized FCT from flow CSVs and
compare against a summary.csv produced by caft_sim."""

import argparse
import csv
import glob
import math
import os
import sys
from collections import defaultdict


def per_seed_means(rows):
    sums = defaultdict(lambda: [0.0, 0])
    for r in rows:
        if r["state"] != "done":
            continue
        key = (r["scheme"], float(r["load"]), int(r["failures"]), int(r["seed"]))
        sums[key][0] += float(r["fct_s"])
        sums[key][1] += 1
    return {k: s / n for k, (s, n) in sums.items() if n}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("dir")
    ap.add_argument("--rtol", type=float, default=1e-7)
    args = ap.parse_args()

    rows = []
    for path in sorted(glob.glob(os.path.join(args.dir, "flows_*.csv"))):
        with open(path, newline="") as f:
            rows.extend(csv.DictReader(f))
    seed_mean = per_seed_means(rows)

    groups = defaultdict(dict)
    for (scheme, load, fail, seed), m in seed_mean.items():
        groups[(scheme, load, fail)][seed] = m

    expected = {}
    for (scheme, load, fail), seeds in groups.items():
        mean = sum(seeds.values()) / len(seeds)
        norm = None
        base = groups.get(("ecmp", load, fail), {})
        if all(s in base for s in seeds):
            norm = sum(m / base[s] for s, m in seeds.items()) / len(seeds)
        expected[(scheme, round(load, 2), fail)] = (mean, norm)

    with open(os.path.join(args.dir, "summary.csv"), newline="") as f:
        summary = list(csv.DictReader(f))

    bad = 0
    if len(summary) != len(expected):
        print(f"row count {len(summary)} != {len(expected)}")
        bad += 1
    for r in summary:
        key = (r["scheme"], round(float(r["load"]), 2), int(r["failures"]))
        if key not in expected:
            print(f"unexpected row {key}")
            bad += 1
            continue
        mean, norm = expected[key]
        if not math.isclose(float(r["mean_fct_s"]), mean, rel_tol=args.rtol):
            print(f"{key}: mean_fct_s {r['mean_fct_s']} != {mean}")
            bad += 1
        got_norm = r["norm_fct_vs_ecmp"]
        if (norm is None) != (got_norm == "") or (
            norm is not None and not math.isclose(float(got_norm), norm, rel_tol=args.rtol)
        ):
            print(f"{key}: norm {got_norm!r} != {norm}")
            bad += 1
    print(f"checked {len(summary)} rows, {bad} mismatches")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
