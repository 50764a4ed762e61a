#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the pure-numpy fallback.

Times the blockwise hot kernels on representative shapes plus one
end-to-end solve per backend. Run directly:

    python benchmarks/bench_kernels.py [--repeats 200]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from bmsync import _kernels_py as kpy

try:
    from bmsync import _kernels_cy as kcy
except ImportError:
    kcy = None

SHAPES = [
    ("z2 sweep cell", 300, 1, 4),
    ("planar oscillators", 200, 1, 2),
    ("rotation sync", 50, 3, 8),
    ("wide blocks", 100, 5, 12),
]


def time_call(fn, *args, repeats):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def bench_kernels(repeats):
    print(f"{'case':<22} {'kernel':<18} {'py (us)':>10} {'cy (us)':>10} {'speedup':>8}")
    for label, n, d, p in SHAPES:
        rng = np.random.default_rng(0)
        S = kpy.polar_factor(rng.standard_normal((n * d, p)), n, d)
        Z = rng.standard_normal((n * d, p))
        X = rng.standard_normal((n * d, n * d))
        Y = S + 0.01 * rng.standard_normal((n * d, p))
        for name, args in (
            ("bdg", (X, n, d)),
            ("block_sym_outer", (Z, S, n, d)),
            ("project_tangent", (S, Z, n, d)),
            ("polar_factor", (Y, n, d)),
        ):
            t_py = time_call(getattr(kpy, name), *args, repeats=repeats)
            if kcy is None:
                print(f"{label:<22} {name:<18} {t_py * 1e6:>10.1f} {'n/a':>10} {'n/a':>8}")
            else:
                t_cy = time_call(getattr(kcy, name), *args, repeats=repeats)
                print(f"{label:<22} {name:<18} {t_py * 1e6:>10.1f} {t_cy * 1e6:>10.1f} "
                      f"{t_py / t_cy:>7.1f}x")


def bench_solve():
    import os
    import subprocess
    import sys

    print("\nend-to-end solve (n=300 d=1 p=4, 5 seeds) per backend:", flush=True)
    code = (
        "import time, math\n"
        "from bmsync import gen_z2, solve, SolverConfig, kernels\n"
        "t0 = time.perf_counter()\n"
        "for seed in range(5):\n"
        "    inst = gen_z2(300, 0.18, seed=seed)\n"
        "    solve(inst.A, 1, SolverConfig(p=4, seed=seed), truth=inst.truth)\n"
        "print(f'  {kernels.BACKEND}: {(time.perf_counter()-t0)/5*1000:.1f} ms/solve')\n"
    )
    for backend in ("py", "cy"):
        if backend == "cy" and kcy is None:
            continue
        env = dict(os.environ, BMSYNC_KERNELS=backend)
        subprocess.run([sys.executable, "-c", code], env=env, check=True)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()
    if kcy is None:
        print("compiled backend not available; timing the fallback only")
    bench_kernels(args.repeats)
    bench_solve()


if __name__ == "__main__":
    main()
