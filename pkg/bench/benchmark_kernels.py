"""Benchmark the compiled banded kernels against the numpy/scipy fallback.

Times the two hot kernels (five-diagonal matvec, pivoted pentadiagonal
factor+solve) at several sizes and cross-checks that both backends produce
the same numbers.  With --end-to-end, also times one full scattering sample
under each backend in subprocesses (backend selection happens at import).

Usage:  python bench/benchmark_kernels.py [--end-to-end]
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from cmvscat import _kernels
from cmvscat._kernels import fallback

SIZES = (4097, 16385, 65537, 262145)
REPEAT = 5


def _make_problem(rng, n):
    diags = rng.standard_normal((5, n)) + 1j * rng.standard_normal((5, n))
    diags[0, :2] = 0
    diags[1, :1] = 0
    diags[3, n - 1:] = 0
    diags[4, n - 2:] = 0
    ab = np.zeros((7, n), dtype=complex)
    for d in range(5):
        o = d - 2
        lo, hi = max(0, -o), n - max(0, o)
        ab[4 - o, lo + o:hi + o] = diags[d, lo:hi]
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return diags, ab, x


def _best_of(repeat, fn):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run_kernel_benchmarks():
    if _kernels.BACKEND != "compiled":
        print("compiled backend not built; run `python setup.py build_ext --inplace`")
        print("timing the python fallback only\n")
    rng = np.random.default_rng(0)
    header = f"{'n':>8} {'kernel':<14} {'python':>10} {'compiled':>10} {'speedup':>8}  agree"
    print(header)
    print("-" * len(header))
    for n in SIZES:
        diags, ab, x = _make_problem(rng, n)
        t_py, y_py = _best_of(REPEAT, lambda: fallback.band5_matvec(diags, x))
        if _kernels.BACKEND == "compiled":
            t_c, y_c = _best_of(REPEAT, lambda: _kernels.band5_matvec(diags, x))
            agree = np.max(np.abs(y_c - y_py))
            print(f"{n:>8} {'matvec':<14} {t_py*1e3:>9.2f}m {t_c*1e3:>9.2f}m "
                  f"{t_py/t_c:>7.1f}x  {agree:.1e}")
        else:
            print(f"{n:>8} {'matvec':<14} {t_py*1e3:>9.2f}m {'-':>10} {'-':>8}")

        b = x.copy()
        t_py, x_py = _best_of(REPEAT, lambda: fallback.factor_banded(ab.copy()).solve(b))
        if _kernels.BACKEND == "compiled":
            t_c, x_c = _best_of(REPEAT, lambda: _kernels.factor_banded(ab.copy()).solve(b))
            agree = np.max(np.abs(x_c - x_py)) / max(1.0, np.max(np.abs(x_py)))
            print(f"{n:>8} {'factor+solve':<14} {t_py*1e3:>9.2f}m {t_c*1e3:>9.2f}m "
                  f"{t_py/t_c:>7.1f}x  {agree:.1e}")
        else:
            print(f"{n:>8} {'factor+solve':<14} {t_py*1e3:>9.2f}m {'-':>10} {'-':>8}")


_END_TO_END_SNIPPET = """
import time
import cmvscat as cs
from cmvscat.operator import Window
calc = cs.ScatteringCalculator(cs.random_decay(seed=1, rate=0.5), 0,
                               cs.RadialSchedule(), window=Window(-2048, 2048))
calc.sample(0.3)  # warm caches
t0 = time.perf_counter()
s = calc.sample(1.7)
print(f"{cs.backend_name()} backend: one scattering sample "
      f"{time.perf_counter() - t0:.3f} s (unitarity defect {s.unitarity_defect:.1e})")
"""


def run_end_to_end():
    print("\nend-to-end (one theta sample, random_decay, default schedule):")
    for backend in ("python", "compiled"):
        env = dict(os.environ, CMVSCAT_KERNELS=backend)
        out = subprocess.run([sys.executable, "-c", _END_TO_END_SNIPPET],
                             env=env, capture_output=True, text=True)
        if out.returncode:
            print(f"  {backend}: failed ({out.stderr.strip().splitlines()[-1]})")
        else:
            print("  " + out.stdout.strip())


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--end-to-end", action="store_true",
                        help="also time a full scattering sample per backend")
    args = parser.parse_args()
    run_kernel_benchmarks()
    if args.end_to_end:
        run_end_to_end()
