#!/usr/bin/env python3
"""Benchmark the jitted kernels against the pure-numpy fallback.

Times the warm-started coordinate descent path and the Huber pair sweep at
a few problem sizes and prints a speedup table.

Usage:
    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --sizes 30 60 120 --repeats 5
    python benchmarks/bench_kernels.py --output bench.json
"""

import argparse
import json
import time

import numpy as np

from adapdiscom import kernels
from adapdiscom.moments import HUBER_TOL


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cd_path_problem(rng, p):
    A = rng.standard_normal((p + 10, p))
    sigma = np.ascontiguousarray(A.T @ A / (p + 10))
    c = rng.standard_normal(p)
    lams = np.geomspace(np.abs(c).max(), 0.01 * np.abs(c).max(), 30)
    return sigma, c, lams


def run_cd(solver, sigma, c, lams):
    p = c.size
    beta = np.zeros(p)
    sb = np.zeros(p)
    free = np.ones(p, dtype=bool)
    for lam in lams:
        solver(sigma, c, float(lam), beta, sb, free, 1e-7, 10000, True)
    return beta


def huber_problem(rng, p, n=150):
    X = rng.standard_t(4, size=(n, p))
    mask = np.ones((n, p), dtype=bool)
    mask[n // 2:, : p // 2] = False
    H = np.full((p, p), 2.0)
    return np.ascontiguousarray(X), mask, H


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[30, 60, 120])
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--output", default=None, help="write results as JSON")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    results = []
    jitted = kernels.using_numba()
    print(f"numba path active: {jitted}")
    if jitted:
        # trigger compilation outside the timed region
        sigma, c, lams = cd_path_problem(rng, 8)
        run_cd(kernels.cd_solve, sigma, c, lams)
        X, mask, H = huber_problem(rng, 6)
        kernels.huber_sigma_sweep(X, mask, H, HUBER_TOL)

    print(f"\n{'kernel':<14} {'p':>5} {'numba (s)':>12} {'fallback (s)':>13} {'speedup':>9}")
    print("-" * 58)
    for p in args.sizes:
        sigma, c, lams = cd_path_problem(rng, p)
        t_py = time_call(lambda: run_cd(kernels._cd_solve_impl, sigma, c, lams),
                         args.repeats)
        t_nb = (time_call(lambda: run_cd(kernels.cd_solve, sigma, c, lams),
                          args.repeats) if jitted else float("nan"))
        ratio = t_py / t_nb if jitted else float("nan")
        print(f"{'cd-path':<14} {p:>5} {t_nb:>12.4f} {t_py:>13.4f} {ratio:>8.1f}x")
        results.append({"kernel": "cd-path", "p": p, "numba_s": t_nb,
                        "fallback_s": t_py})

        X, mask, H = huber_problem(rng, p)
        t_py = time_call(lambda: kernels._huber_sigma_sweep_py(X, mask, H, HUBER_TOL),
                         args.repeats)
        t_nb = (time_call(lambda: kernels.huber_sigma_sweep(X, mask, H, HUBER_TOL),
                          args.repeats) if jitted else float("nan"))
        ratio = t_py / t_nb if jitted else float("nan")
        print(f"{'huber-sweep':<14} {p:>5} {t_nb:>12.4f} {t_py:>13.4f} {ratio:>8.1f}x")
        results.append({"kernel": "huber-sweep", "p": p, "numba_s": t_nb,
                        "fallback_s": t_py})

    if args.output:
        with open(args.output, "w") as fh:
            json.dump(results, fh, indent=2)
        print(f"\nwrote {args.output}")


if __name__ == "__main__":
    main()
