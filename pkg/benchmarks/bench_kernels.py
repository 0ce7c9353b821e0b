"""Benchmark the numba kernels against the pure numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--n N] [--k K] [--B B]

Times each bootstrap kind end to end (ensemble construction on the
default angular point set) plus the extreme-value sampler, under both
kernel backends, and prints a table with speedups.  The numba pass runs
once untimed first so compilation is excluded.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import tailcop as tc
from tailcop import _kernels


def time_call(fn, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=5000)
    parser.add_argument("--k", type=int, default=250)
    parser.add_argument("--B", type=int, default=500)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    model = tc.make_model("clayton", lambda_coef=0.5)
    sample = tc.BivariateSample(model.sample(args.n, tc.stream(12)))
    est = tc.EmpiricalTailCopula(sample, args.k)
    points = tc.default_point_set(tc.AngularGrid.midpoint(100).nodes)
    aneglog = tc.make_model("aneglog", theta=1.3)

    def bench_kind(kind):
        src = sample if kind == "known_margins" else est
        return lambda: tc.build_ensemble(
            kind, src, args.k, args.B, points, rng=tc.stream(77)
        )

    tasks = [(kind, bench_kind(kind)) for kind in tc.KINDS]
    tasks.append(("ev-sampler", lambda: aneglog.sample(args.n, tc.stream(5))))

    results = {}
    for backend in ("numba", "numpy"):
        try:
            _kernels.set_backend(backend)
        except Exception as exc:  # numba may be absent
            print(f"skipping {backend}: {exc}")
            continue
        for name, fn in tasks:
            if backend == "numba":
                fn()  # warm the jit cache
            results[(backend, name)] = time_call(fn, args.repeat)
    _kernels.set_backend("auto")

    print(f"\nn={args.n} k={args.k} B={args.B} "
          f"points={points.shape[0]}")
    print(f"{'task':>14} {'numba [s]':>12} {'numpy [s]':>12} {'speedup':>9}")
    for name, _ in tasks:
        tb = results.get(("numba", name))
        tp = results.get(("numpy", name))
        if tb is None or tp is None:
            continue
        print(f"{name:>14} {tb:12.4f} {tp:12.4f} {tp / tb:9.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
