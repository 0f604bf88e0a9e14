"""Wall-clock comparison of the numba and numpy kernel backends.

Run with ``python3 benchmarks/bench_backends.py [--repeat N]``.  Each
workload runs once to warm up (this pays numba's compile cost) and is then
timed ``--repeat`` times; the best time is reported.  The final column is
the largest absolute difference between the two backends' outputs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from reinhardt._backend import kernels, numba_available
from reinhardt.controls import U_C
from reinhardt.dynamics import ClosedLoopPolicy, IntegratorConfig, integrate
from reinhardt.fuller import FullerState, integrate_fuller
from reinhardt.halfplane import sample_star_domain
from reinhardt.sampling import random_admissible_state


def closed_loop(backend):
    s0 = random_admissible_state(np.random.default_rng(7))
    traj = integrate(s0, ClosedLoopPolicy(U_C), 0.2, IntegratorConfig(step=1e-4, record_every=100), backend)
    return traj.data[-1]


def fuller_chain(backend):
    f = FullerState(np.array([0.3 + 0.1j, -0.2 + 0.4j, 0.5 - 0.2j]))
    _, z = integrate_fuller(f, 2.0, 1e-4, 1000, backend)
    return np.abs(z[-1])


XS, YS = sample_star_domain(200_000, np.random.default_rng(3))


def geometry(backend):
    return kernels(backend).geometry_sweep(XS, YS)[:, 9]


WORKLOADS = (
    ("closed-loop RK4, 2000 steps", closed_loop),
    ("Fuller RK4, 20000 steps", fuller_chain),
    ("geometry sweep, 2e5 points", geometry),
)


def best_time(fn, backend, repeat):
    out = fn(backend)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(backend)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not numba_available():
        print("numba is not installed; only the numpy backend can run")
        return 1
    print(f"{'workload':<30} {'numba [s]':>10} {'numpy [s]':>10} {'speedup':>8} {'max |diff|':>11}")
    for name, fn in WORKLOADS:
        tn, on = best_time(fn, "numba", args.repeat)
        tp, op = best_time(fn, "numpy", args.repeat)
        diff = float(np.max(np.abs(np.asarray(on) - np.asarray(op))))
        print(f"{name:<30} {tn:10.4f} {tp:10.4f} {tp / tn:8.1f} {diff:11.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
