"""Benchmark the compiled polynomial kernels against the numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

The first section times the kernel functions directly (compiled versions
are imported alongside the pure-numpy implementations, so one process
can compare both).  The second section times a projection-heavy
closed-loop workload in subprocesses, toggling SPLINEFOLLOW_NO_NUMBA.
"""

import os
import subprocess
import sys
import timeit

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from splinefollow import _kernels  # noqa: E402


def bench_kernels():
    rng = np.random.default_rng(0)
    coeffs = np.ascontiguousarray(rng.normal(size=(2, 6)))
    lams = np.ascontiguousarray(rng.uniform(0.0, 1.0, size=64))

    if not _kernels.USE_NUMBA:
        print("numba disabled (SPLINEFOLLOW_NO_NUMBA set); "
              "only the numpy path is available here")
        return

    # trigger compilation outside the timed region
    _kernels.poly_eval(coeffs, 0.5, 1)
    _kernels.poly_eval_many(coeffs, lams, 1)

    cases = [
        ("poly_eval (scalar)",
         lambda: _kernels.poly_eval(coeffs, 0.5, 1),
         lambda: _kernels._poly_eval_py(coeffs, 0.5, 1)),
        ("poly_eval_many (64 pts)",
         lambda: _kernels.poly_eval_many(coeffs, lams, 1),
         lambda: _kernels._poly_eval_many_py(coeffs, lams, 1)),
    ]
    print(f"{'kernel':28s} {'numba':>12s} {'numpy':>12s} {'speedup':>9s}")
    for name, fast, slow in cases:
        n = 20000
        t_fast = timeit.timeit(fast, number=n) / n
        t_slow = timeit.timeit(slow, number=n) / n
        print(f"{name:28s} {t_fast * 1e6:10.2f}us {t_slow * 1e6:10.2f}us "
              f"{t_slow / t_fast:8.1f}x")


_WORKLOAD = r"""
import time
import numpy as np
from splinefollow import control, curves, dynamics, sim

scen = sim.Scenario.from_file("scenarios/figure_eight_3r.json")
scen.duration = 4.0
t0 = time.time()
sim.run(scen)
print(f"{time.time() - t0:.2f}")
"""


def bench_closed_loop():
    print("\nclosed-loop run (4 s of the figure-eight scenario):")
    for label, env_val in (("numba", ""), ("numpy fallback", "1")):
        env = dict(os.environ, SPLINEFOLLOW_NO_NUMBA=env_val)
        out = subprocess.run(
            [sys.executable, "-c", _WORKLOAD],
            env=env, capture_output=True, text=True, check=True,
        )
        print(f"  {label:16s} {out.stdout.strip()}s")


if __name__ == "__main__":
    bench_kernels()
    bench_closed_loop()
