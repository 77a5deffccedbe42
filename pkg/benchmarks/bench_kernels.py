"""Benchmark the compiled stencil kernels against the NumPy fallback.

Times the raw kernel calls (1D and 2D) and a short implicit solve driven
through each backend. Run from the repository root:

    python benchmarks/bench_kernels.py [--repeats 7]

The compiled backend must be built (pip install -e ., or
python setup.py build_ext --inplace); otherwise only NumPy numbers print.
"""

import argparse
import time

import numpy as np

from spcert._kernels import _stencils_np

try:
    from spcert._kernels import _stencils_cy
except ImportError:
    _stencils_cy = None


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_kernels(repeats):
    rng = np.random.default_rng(0)
    cases = []
    for n in (256, 1024, 4096):
        wpad = rng.random(n + 2)
        cases.append((f"flux_arrays_1d n={n}",
                      lambda m, w=wpad: m.flux_arrays_1d(w, 1e-2, 1.5, 1e-4)))
    for n in (64, 128, 256):
        wpad = rng.random((n + 2, n + 2))
        cases.append((f"flux_arrays_2d {n}x{n}",
                      lambda m, w=wpad: m.flux_arrays_2d(w, 1e-2, 1.5, 1e-4)))

    print(f"{'kernel':>24} {'numpy':>12} {'cython':>12} {'speedup':>9}")
    for name, call in cases:
        t_np = best_of(lambda: call(_stencils_np), repeats)
        if _stencils_cy is None:
            print(f"{name:>24} {t_np * 1e6:>10.1f}us {'(not built)':>12}")
            continue
        t_cy = best_of(lambda: call(_stencils_cy), repeats)
        print(f"{name:>24} {t_np * 1e6:>10.1f}us {t_cy * 1e6:>10.1f}us "
              f"{t_np / t_cy:>8.2f}x")


def bench_solve(repeats):
    import os
    import subprocess
    import sys

    script = (
        "import numpy as np, time\n"
        "from spcert.core_model import Grid, ProblemParams\n"
        "from spcert.solver import SolverConfig, solve\n"
        "from spcert import _kernels\n"
        "g = Grid(dim_n=1, cells_per_axis=2048, domain_half_width=1.0,"
        " dt=2e-4, n_steps=40, bc='periodic')\n"
        "pp = ProblemParams(dim_n=1, p=1.5)\n"
        "x = g.axis_centers()\n"
        "u0 = 1.0 + np.maximum(0.0, 1.0 - (x / 0.5) ** 2) ** 3\n"
        "t0 = time.perf_counter()\n"
        "solve(u0, SolverConfig(), g, pp)\n"
        "print(_kernels.BACKEND, time.perf_counter() - t0)\n"
    )
    print(f"\n{'full 1D solve (2048 cells, 40 steps)':>40}")
    for backend in ("numpy", "cython"):
        env = dict(os.environ, SPCERT_KERNELS=backend)
        best = None
        for _ in range(max(2, repeats // 2)):
            out = subprocess.run([sys.executable, "-c", script], env=env,
                                 capture_output=True, text=True)
            if out.returncode != 0:
                print(f"{backend:>14}: unavailable")
                break
            used, t = out.stdout.split()
            assert used == backend, f"backend selection failed: {used}"
            best = min(best, float(t)) if best is not None else float(t)
        else:
            print(f"{backend:>14}: {best * 1e3:.1f} ms")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=7)
    args = ap.parse_args()
    bench_kernels(args.repeats)
    bench_solve(args.repeats)


if __name__ == "__main__":
    main()
