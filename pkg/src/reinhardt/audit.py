"""Invariant audits behind ``reinhardt check``.

Each audit returns the largest residual it saw; the table compares that
number against a fixed tolerance.  The audits are small versions of the
test-suite oracles so that an installed copy can vouch for itself.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .controls import U_C, boundary_sweep, control_matrix, maximize_disk
from .dynamics import (
    ClosedLoopPolicy,
    ConstantPolicy,
    IntegratorConfig,
    abnormal_series,
    constant_control_solution,
    integrate,
    integrate_abnormal,
)
from .extremals import CIRCLE_DENSITY, OCTAGON_DENSITY, Hypotrochoid, circle_extremal, octagon_shoot, wedge_series
from .fuller import A_c, FullerState, H_c, fuller_field, log_spiral, log_spiral_derivative, poisson_bracket_c
from .halfplane import geometry_sweep, sample_star_domain
from .sampling import random_abnormal, random_admissible_state, random_control_point, random_persistent_state, random_traceless
from .sl2 import commutator, trace_form


@dataclass(frozen=True)
class AuditResult:
    name: str
    residual: float
    tolerance: float
    seconds: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= self.tolerance)

    def as_dict(self) -> dict:
        return {"name": self.name, "residual": self.residual, "tolerance": self.tolerance,
                "passed": self.passed, "seconds": round(self.seconds, 3)}


def _sl2_identities(rng) -> float:
    worst = 0.0
    for _ in range(200):
        A, B, C, D = (random_traceless(rng) for _ in range(4))
        jac = commutator(commutator(A, B), C) + commutator(commutator(B, C), A) + commutator(commutator(C, A), B)
        worst = max(worst, float(np.max(np.abs(jac.as_array()))))
        worst = max(worst, abs(trace_form(A, commutator(B, C)) - trace_form(commutator(A, B), C)))
        lhs = trace_form(A, C) * trace_form(B, D) - trace_form(B, C) * trace_form(A, D)
        worst = max(worst, abs(lhs + 0.5 * trace_form(commutator(A, B), commutator(C, D))))
    return worst


def _triangle_sum(rng) -> float:
    xs, ys = sample_star_domain(2000, rng)
    rows = geometry_sweep(xs, ys)
    return float(np.max(np.abs(rows[:, 0] + rows[:, 1] + rows[:, 2] - math.sqrt(3.0) / 4.0)))


def _circle(rng) -> float:
    c = circle_extremal(1000)
    return max(abs(c.density - CIRCLE_DENSITY), c.residuals.max)


def _constant_control(rng) -> float:
    worst = 0.0
    cfg = IntegratorConfig(step=1e-3, record_every=1000)
    for _ in range(3):
        s0 = random_admissible_state(rng)
        Z = control_matrix(random_control_point(rng))
        traj = integrate(s0, ConstantPolicy(Z), 1.0, cfg)
        exact = constant_control_solution(s0, Z, 1.0)
        worst = max(worst, float(np.max(np.abs(traj.data[-1] - exact.as_array()))))
    return worst


def _conservation(rng) -> float:
    s0 = random_persistent_state(rng, U_C, 1.0)
    traj = integrate(s0, ClosedLoopPolicy(U_C), 1.0, IntegratorConfig(step=1e-4, record_every=50))
    if traj.exited:
        return math.inf
    d = traj.drift()
    return max(d.det_X, d.det_L1, d.angular_momentum)


def _disk_oracle(rng) -> float:
    worst = 0.0
    n = 10_000
    for _ in range(10):
        s = random_admissible_state(rng)
        opt = maximize_disk(s.X, s.L1, s.LR, U_C)
        _, vals = boundary_sweep(s.X, s.L1, s.LR, U_C, n)
        worst = max(worst, float(np.max(vals)) - opt.value)
    return max(worst, 0.0)


def _spiral(rng) -> float:
    ts = np.geomspace(0.05, 2.0, 50)
    z = log_spiral(ts)
    dz = log_spiral_derivative(ts)
    worst = 0.0
    for k in range(ts.size):
        worst = max(worst, float(np.max(np.abs(fuller_field(FullerState(z[:, k])) - dz[:, k]))))
        worst = max(worst, abs(H_c(z[:, k])), abs(A_c(z[:, k])))
    return worst


def _bracket(rng) -> float:
    worst = 0.0
    for _ in range(20):
        z = rng.normal(size=3) + 1j * rng.normal(size=3)
        worst = max(worst, abs(poisson_bracket_c(H_c, A_c, z)))
    return worst


def _hypotrochoid(rng) -> float:
    h = Hypotrochoid(1.0, 0.3, 1.0 / 7.0)
    ts = np.linspace(0.0, 40.0, 1000)
    w = wedge_series(h, ts)
    return max(float(np.max(np.abs(w - math.sqrt(3.0) / 2.0))), h.period_shift_residual(ts))


def _abnormal(rng) -> float:
    X0, LR0, K = random_abnormal(rng)
    h = 1e-3
    ser = abnormal_series(integrate_abnormal(X0, LR0, K, h, 500), K)
    v = ser["v"]
    second = float(np.max(np.abs(v[2:] - 2.0 * v[1:-1] + v[:-2])))
    return second / (h * h)


def _abnormal_invariants(rng) -> float:
    X0, LR0, K = random_abnormal(rng)
    ser = abnormal_series(integrate_abnormal(X0, LR0, K, 1e-3, 1000), K)
    return float(max(np.ptp(ser["c_R"]), np.ptp(ser["c_K"])))


@lru_cache(maxsize=1)
def _octagon_result():
    return octagon_shoot(1)


def _octagon_density(rng) -> float:
    return abs(_octagon_result().density - OCTAGON_DENSITY)


def _octagon_residuals(rng) -> float:
    o = _octagon_result()
    return max(o.residuals.max, o.hamiltonian_max)


AUDITS: tuple[tuple[str, Callable, float], ...] = (
    ("sl2 identities", _sl2_identities, 1e-12),
    ("triangle-area sum", _triangle_sum, 1e-12),
    ("circle extremal", _circle, 1e-9),
    ("constant control vs RK4", _constant_control, 1e-6),
    ("closed-loop conservation", _conservation, 1e-7),
    ("disk maximiser vs sweep", _disk_oracle, 1e-8),
    ("log-spiral residual", _spiral, 1e-12),
    ("{H_c, A_c} bracket", _bracket, 1e-6),
    ("hypotrochoid wedge", _hypotrochoid, 1e-10),
    ("abnormal v'' / step^2", _abnormal, 1e-6),
    ("abnormal c_K, c_R drift", _abnormal_invariants, 1e-9),
)

SLOW_AUDITS: tuple[tuple[str, Callable, float], ...] = (
    ("octagon k=1 density", _octagon_density, 1e-3),
    ("octagon k=1 H and transversality", _octagon_residuals, 1e-6),
)


def run_audits(seed: int = 0, include_slow: bool = True) -> list[AuditResult]:
    rng = np.random.default_rng(seed)
    out = []
    for name, fn, tol in AUDITS + (SLOW_AUDITS if include_slow else ()):
        t0 = time.perf_counter()
        res = float(fn(rng))
        out.append(AuditResult(name, res, tol, time.perf_counter() - t0))
    return out


def format_table(results: list[AuditResult]) -> str:
    w = max(len(r.name) for r in results)
    lines = [f"{'check':<{w}}  {'residual':>10}  {'tolerance':>9}  result"]
    for r in results:
        lines.append(f"{r.name:<{w}}  {r.residual:10.3e}  {r.tolerance:9.1e}  {'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)


__all__ = ["AuditResult", "AUDITS", "SLOW_AUDITS", "run_audits", "format_table"]
