#!/usr/bin/env python3
"""Benchmark the compiled CSR kernels against the pure-numpy fallback.

Times the four matrix kernels and one end-to-end logistic training run on a
synthetic-scale problem, checks that both backends agree numerically, and
prints a comparison table. Run as:

    python benchmarks/bench_kernels.py [--users 3760] [--apps 8840] [--repeats 5]
"""

import argparse
import time

import numpy as np

from appdemog import _kernels_py
from appdemog.backend import kernels as active
from appdemog.logreg import TrainConfig, train
from appdemog.sampling import RULES, balance, binarize
from appdemog.sparse import SparseBinaryMatrix
from appdemog.synth import SynthConfig, generate


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--users", type=int, default=3760)
    ap.add_argument("--apps", type=int, default=8840)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if active.NAME == _kernels_py.NAME:
        print("note: compiled extension unavailable; comparing python against itself")

    print(f"generating {args.users} users x {args.apps} apps ...")
    ds = generate(SynthConfig(n_users=args.users, n_apps=args.apps), seed=args.seed)
    M = ds.matrix
    rng = np.random.default_rng(1)
    v = rng.standard_normal(M.n_cols)
    u = rng.standard_normal(M.n_rows)
    B = rng.standard_normal((M.n_cols, 58))
    U = rng.standard_normal((M.n_rows, 58))
    indptr, indices = M.row_offsets, M.col_indices
    print(f"matrix: {M} ({M.nnz / (M.n_rows * M.n_cols):.2%} dense)\n")

    cases = [
        ("matvec", lambda k: k.matvec(indptr, indices, v, M.n_rows)),
        ("rmatvec", lambda k: k.rmatvec(indptr, indices, u, M.n_cols)),
        ("matmat(58)", lambda k: k.matmat(indptr, indices, B, M.n_rows)),
        ("rmatmat(58)", lambda k: k.rmatmat(indptr, indices, U, M.n_cols)),
    ]
    header = f"{'kernel':<14}{active.NAME:>12}{'python':>12}{'speedup':>10}{'max |diff|':>14}"
    print(header)
    print("-" * len(header))
    for name, call in cases:
        out_a = call(active)
        out_p = call(_kernels_py)
        diff = float(np.max(np.abs(np.asarray(out_a) - np.asarray(out_p))))
        t_a = timeit(lambda: call(active), args.repeats)
        t_p = timeit(lambda: call(_kernels_py), args.repeats)
        print(f"{name:<14}{t_a * 1e3:>10.2f}ms{t_p * 1e3:>10.2f}ms{t_p / t_a:>9.1f}x{diff:>14.2e}")
        if diff > 1e-9:
            raise SystemExit(f"backend mismatch in {name}: {diff}")

    pool = balance(binarize(ds.records, RULES["gender"]), seed=2)
    X = M.select("rows", pool.row_indices)
    y = pool.labels.astype(np.float64)
    t_train = timeit(lambda: train(X, y, TrainConfig()), 1)
    print(f"\ntrain() on the balanced pool [{active.NAME} backend]: {t_train:.2f}s")
    print("rerun with APPDEMOG_PURE_PYTHON=1 to time training on the fallback")


if __name__ == "__main__":
    main()
