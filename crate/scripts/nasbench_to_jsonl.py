#!/usr/bin/env python3
"""Convert a NAS-Bench-101 export into the tabular JSONL format read by
`bananas validate-data` and `benchmark.kind = tabular`.

Needs the `nasbench` package and the dataset file (not shipped here):

    python nasbench_to_jsonl.py nasbench_only108.tfrecord > nasbench.jsonl

Mapping:
  - module_operations  -> ops (input/output dropped, names shortened to
    conv1x1, conv3x3, maxpool3x3)
  - module_adjacency   -> edges (upper-triangular entries)
  - validation accuracy of the three 108-epoch runs -> val = 1 - acc
  - mean test accuracy -> test = 1 - mean
  - trainable_parameters -> params

NAS-Bench-101 stores cells pruned, so some have fewer than 7 nodes. They are
skipped by default because the default space has exactly 7; `--keep-small`
writes them anyway for use with a matching `space.n_nodes`.
"""
import argparse
import json
import sys

OPS = {"conv1x1-bn-relu": "conv1x1", "conv3x3-bn-relu": "conv3x3", "maxpool3x3": "maxpool3x3"}


def record(fixed, computed):
    matrix = fixed["module_adjacency"]
    ops = [OPS[o] for o in fixed["module_operations"][1:-1]]
    n = len(matrix)
    edges = [f"({i},{j})" for i in range(n) for j in range(i + 1, n) if matrix[i][j]]
    runs = computed[108]
    val = [1.0 - r["final_validation_accuracy"] for r in runs]
    test = 1.0 - sum(r["final_test_accuracy"] for r in runs) / len(runs)
    return n, {
        "cell": f"ops=[{','.join(ops)}];edges=[{','.join(edges)}]",
        "val": val,
        "test": test,
        "params": fixed["trainable_parameters"],
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("dataset")
    ap.add_argument("--keep-small", action="store_true")
    args = ap.parse_args()
    try:
        from nasbench import api
    except ImportError:
        sys.exit("the nasbench package is required (github.com/google-research/nasbench)")
    nb = api.NASBench(args.dataset)
    skipped = 0
    for h in nb.hash_iterator():
        n, rec = record(*nb.get_metrics_from_hash(h))
        if n != 7 and not args.keep_small:
            skipped += 1
            continue
        print(json.dumps(rec))
    print(f"skipped {skipped} cells with fewer than 7 nodes", file=sys.stderr)


if __name__ == "__main__":
    main()
