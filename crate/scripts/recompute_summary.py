#!/usr/bin/env python3
"""Recompute summary.csv of an experiment directory from the per-algorithm
result CSVs and compare it with the emitted one.

usage: recompute_summary.py <results-dir> [--tol 1e-9]
"""
import argparse
import csv
import math
import sys
from collections import defaultdict
from pathlib import Path


def checkpoints(budget):
    q = list(range(10, budget + 1, 10))
    if not q or q[-1] != budget:
        q.append(budget)
    return q


def recompute(results_dir, algorithm):
    best = defaultdict(dict)
    with open(results_dir / f"{algorithm}.csv", newline="") as f:
        for row in csv.DictReader(f):
            trial, query = int(row["trial"]), int(row["query"])
            prev = best[trial].get(query - 1, math.inf)
            best[trial][query] = min(prev, float(row["observed"]))
    budget = max(max(q) for q in best.values())
    rows = {}
    for q in checkpoints(budget):
        vals = [b[q] for b in best.values() if q in b]
        n = len(vals)
        mean = sum(vals) / n
        std = math.sqrt(sum((v - mean) ** 2 for v in vals) / (n - 1)) if n > 1 else 0.0
        rows[q] = (mean, std, n)
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("results_dir", type=Path)
    ap.add_argument("--tol", type=float, default=1e-9)
    args = ap.parse_args()

    emitted = defaultdict(dict)
    with open(args.results_dir / "summary.csv", newline="") as f:
        for row in csv.DictReader(f):
            emitted[row["algorithm"]][int(row["query"])] = (
                float(row["mean_best_so_far"]),
                float(row["std_best_so_far"]),
                int(row["trials"]),
            )

    worst = 0.0
    for algorithm, rows in emitted.items():
        ours = recompute(args.results_dir, algorithm)
        if set(ours) != set(rows):
            sys.exit(f"{algorithm}: checkpoints differ: {sorted(ours)} vs {sorted(rows)}")
        for q, (m, s, n) in rows.items():
            rm, rs, rn = ours[q]
            if n != rn:
                sys.exit(f"{algorithm} query {q}: trial count {n} vs {rn}")
            worst = max(worst, abs(m - rm), abs(s - rs))
    print(f"{len(emitted)} algorithms, max abs difference {worst:.3e}")
    if worst > args.tol:
        sys.exit(f"difference exceeds tolerance {args.tol}")


if __name__ == "__main__":
    main()
