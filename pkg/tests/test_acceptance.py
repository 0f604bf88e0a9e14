"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run under pytest (``pytest tests/test_acceptance.py -s``) or directly with
``python3 tests/test_acceptance.py`` for just the summary lines.
"""

import math
import sys
import time

import numpy as np
import pytest

from reinhardt.controls import U_C, boundary_sweep, control_matrix, maximize_disk
from reinhardt.dynamics import (
    ClosedLoopPolicy,
    ConstantPolicy,
    IntegratorConfig,
    abnormal_series,
    constant_control_solution,
    integrate,
    integrate_abnormal,
)
from reinhardt.extremals import OCTAGON_DENSITY, Hypotrochoid, circle_extremal, octagon_shoot, wedge_series
from reinhardt.fuller import (
    A_c,
    FullerState,
    H_c,
    fuller_field,
    integrate_fuller,
    log_spiral,
    log_spiral_derivative,
    near_singular_run,
    poisson_bracket_c,
    valuation_fit,
)
from reinhardt.halfplane import exclusion_bound, geometry_sweep, sample_star_domain
from reinhardt.sampling import (
    project_perp,
    random_abnormal,
    random_admissible_state,
    random_control_point,
    random_persistent_state,
    random_traceless,
)
from reinhardt.sl2 import R, commutator, exp_traceless, product, so21, trace_form

SEED = 20221006

CIRCLE_DENSITY_TOL = 1e-9
CIRCLE_ENDPOINT_TOL = 1e-12
CIRCLE_SECONDS = 1.0
OCTAGON_DENSITY_TOL = 1e-3
OCTAGON_RESIDUAL_TOL = 1e-6
OCTAGON_SECONDS = 60.0
CLOSED_FORM_TOL = 1e-6
CONSERVATION_TOL = 1e-8
ANGMOM_TOL = 1e-7
STEP = 1e-4
SWEEP_POINTS = 10_000
SWEEP_SLACK = 1e-8
SPIRAL_TOL = 1e-12
FULLER_DRIFT_TOL = 1e-9
BRACKET_TOL = 1e-6
SLOPE_TOL = 1e-9
EXPLORATORY_SLOPE_TOL = 0.2
TRIANGLE_TOL = 1e-12
REGION_SAMPLES = 1_000_000
IDENTITY_TOL = 1e-12
IDENTITY_SAMPLES = 1000
EXP_GROUP_TOL = 1e-10
ABNORMAL_STEP = 1e-3
ABNORMAL_SECOND_DIFF = 1e-6
ABNORMAL_INVARIANT_TOL = 1e-9
WEDGE_TOL = 1e-12
SHIFT_TOL = 1e-10


def report(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} -- {detail}"
    sys.__stdout__.write(line + "\n")
    sys.__stdout__.flush()
    return passed


def make_rng(offset):
    return np.random.default_rng(SEED + offset)


def test_criterion_01_circle():
    t0 = time.perf_counter()
    c = circle_extremal()
    elapsed = time.perf_counter() - t0
    err = abs(c.density - math.pi / math.sqrt(12.0))
    endpoint = c.trajectory.final.g.distance(R)
    ok = err <= CIRCLE_DENSITY_TOL and endpoint <= CIRCLE_ENDPOINT_TOL and elapsed < CIRCLE_SECONDS
    report(1, "circle extremal", ok,
           f"density error {err:.2e}, |g(pi/3) - R| {endpoint:.2e}, {elapsed:.3f} s")
    assert ok


def test_criterion_02_octagon():
    t0 = time.perf_counter()
    o = octagon_shoot(1)
    elapsed = time.perf_counter() - t0
    err = abs(o.density - OCTAGON_DENSITY)
    ok = (err <= OCTAGON_DENSITY_TOL and o.residuals.max <= OCTAGON_RESIDUAL_TOL
          and o.hamiltonian_max <= OCTAGON_RESIDUAL_TOL and elapsed < OCTAGON_SECONDS)
    report(2, "smoothed octagon by shooting", ok,
           f"density {o.density:.10f} (error {err:.2e}), transversality {o.residuals.max:.2e}, "
           f"max |H| {o.hamiltonian_max:.2e}, {elapsed:.1f} s")
    assert ok


def test_criterion_03_closed_form_vs_rk4():
    rng = make_rng(3)
    cfg = IntegratorConfig(step=STEP, record_every=1000)
    worst = 0.0
    for _ in range(20):
        s = random_admissible_state(rng)
        Z = control_matrix(random_control_point(rng))
        traj = integrate(s, ConstantPolicy(Z), 1.0, cfg)
        for t, row in zip(traj.times, traj.data):
            worst = max(worst, float(np.max(np.abs(row - constant_control_solution(s, Z, t).as_array()))))
    ok = worst <= CLOSED_FORM_TOL
    report(3, "closed form vs RK4", ok, f"max componentwise error {worst:.2e} over 20 runs")
    assert ok


def test_criterion_04_conservation():
    rng = make_rng(4)
    cfg = IntegratorConfig(step=STEP, record_every=100)
    det_x = det_l1 = xz = angmom = 0.0
    for _ in range(10):
        s = random_admissible_state(rng)
        Z = control_matrix(random_control_point(rng))
        traj = integrate(s, ConstantPolicy(Z), 1.0, cfg)
        d = traj.drift()
        det_x, det_l1 = max(det_x, d.det_X), max(det_l1, d.det_L1)
        xz = max(xz, float(np.ptp(traj.X @ np.array([2 * Z.a, Z.c, Z.b]))))
    exits = 0
    for _ in range(5):
        s = random_persistent_state(rng, U_C)
        traj = integrate(s, ClosedLoopPolicy(U_C), 1.0, cfg)
        exits += traj.exited
        d = traj.drift()
        det_x, det_l1 = max(det_x, d.det_X), max(det_l1, d.det_L1)
        angmom = max(angmom, d.angular_momentum)
    ok = (det_x <= CONSERVATION_TOL and xz <= CONSERVATION_TOL and det_l1 <= CONSERVATION_TOL
          and angmom <= ANGMOM_TOL and exits == 0)
    report(4, "conservation suite", ok,
           f"det X {det_x:.2e}, <X,Z> {xz:.2e}, det L1 {det_l1:.2e}, angular momentum {angmom:.2e}")
    assert ok


def test_criterion_05_disk_oracle():
    rng = make_rng(5)
    grid_step = 2.0 * math.pi / SWEEP_POINTS
    worst_angle = 0.0
    worst_value = -math.inf
    for _ in range(100):
        s = random_admissible_state(rng)
        opt = maximize_disk(s.X, s.L1, s.LR, U_C)
        theta, vals = boundary_sweep(s.X, s.L1, s.LR, U_C, SWEEP_POINTS)
        gap = abs((math.atan2(opt.z.imag, opt.z.real) - theta[int(np.argmax(vals))] + math.pi) % (2 * math.pi) - math.pi)
        worst_angle = max(worst_angle, gap)
        worst_value = max(worst_value, float(vals.max()) - opt.value)
    ok = worst_angle <= grid_step and worst_value <= SWEEP_SLACK
    report(5, "disk maximiser vs boundary sweep", ok,
           f"max angle gap {worst_angle:.2e} (grid step {grid_step:.2e}), sweep excess {worst_value:.2e}")
    assert ok


def test_criterion_06_fuller_exactness():
    rng = make_rng(6)
    ts = np.geomspace(0.05, 2.0, 100)
    z = log_spiral(ts)
    dz = log_spiral_derivative(ts)
    residual = max(float(np.max(np.abs(fuller_field(FullerState(z[:, k])) - dz[:, k]))) for k in range(ts.size))
    invariants = max(max(abs(H_c(z[:, k])), abs(A_c(z[:, k]))) for k in range(ts.size))
    drift = 0.0
    for _ in range(10):
        f = FullerState(rng.normal(size=3) + 1j * rng.normal(size=3))
        _, rec = integrate_fuller(f, 1.0, STEP, record_every=100)
        drift = max(drift, float(np.ptp([H_c(r) for r in rec])), float(np.ptp([A_c(r) for r in rec])))
    bracket = max(abs(poisson_bracket_c(H_c, A_c, rng.normal(size=3) + 1j * rng.normal(size=3))) for _ in range(100))
    ok = residual <= SPIRAL_TOL and invariants <= SPIRAL_TOL and drift <= FULLER_DRIFT_TOL and bracket <= BRACKET_TOL
    report(6, "Fuller exactness", ok,
           f"spiral residual {residual:.2e}, |H_c|,|A_c| {invariants:.2e}, RK4 drift/unit time {drift:.2e}, "
           f"bracket {bracket:.2e}")
    assert ok


def test_criterion_07_valuations():
    t = np.geomspace(1e-6, 1e-1, 200)
    z = log_spiral(t)
    spiral = [valuation_fit(t, np.abs(z[k])).slope for k in range(3)]
    spiral_err = max(abs(s - (k + 1)) for k, s in enumerate(spiral))
    run = near_singular_run()
    full = [f.slope for f in run.fits]
    full_err = max(abs(s - (k + 1)) for k, s in enumerate(full))
    ok = spiral_err <= SLOPE_TOL
    exploratory = full_err <= EXPLORATORY_SLOPE_TOL and not run.exited
    report(7, "valuation fits", ok,
           f"spiral slopes error {spiral_err:.2e}; full system slopes "
           f"({full[0]:.3f}, {full[1]:.3f}, {full[2]:.3f}) {'within' if exploratory else 'OUTSIDE'} 0.2 (exploratory)")
    assert ok


def test_criterion_08_geometry():
    rng = make_rng(8)
    xs, ys = sample_star_domain(10_000, rng)
    rows = geometry_sweep(xs, ys)
    tsum = float(np.max(np.abs(rows[:, :3].sum(axis=1) - math.sqrt(3.0) / 4.0)))
    hits = 0
    for _ in range(REGION_SAMPLES // 100_000):
        xs, ys = sample_star_domain(100_000, rng, y_max=20.0)
        r = geometry_sweep(xs, ys)
        hits += int(np.sum((r[:, 6] > 0) & (r[:, 7] > 0) & (r[:, 8] > 0)))
    ys_axis = (10.0, 100.0, 1000.0)
    E = [exclusion_bound((0.0, y))[0] for y in ys_axis]
    area_gap = [0.25 - (e - 0.75) for e in E]
    monotone = area_gap[0] > area_gap[1] > area_gap[2] > 0.0
    within = all(1.0 - e < 10.0 / y for e, y in zip(E, ys_axis))
    ok = tsum <= TRIANGLE_TOL and hits == 0 and monotone and within
    report(8, "geometry identities", ok,
           f"triangle sum {tsum:.2e}, triple-region hits {hits}/{REGION_SAMPLES}, "
           f"1 - E(iy) = {', '.join(f'{1 - e:.2e}' for e in E)}")
    assert ok


def test_criterion_09_identities():
    rng = make_rng(9)
    worst = {}
    group = 0.0

    def note(name, value):
        worst[name] = max(worst.get(name, 0.0), float(value))

    for _ in range(IDENTITY_SAMPLES):
        A, B, C, D = (random_traceless(rng) for _ in range(4))
        jac = commutator(commutator(A, B), C) + commutator(commutator(B, C), A) + commutator(commutator(C, A), B)
        note("jacobi", np.max(np.abs(jac.as_array())))
        note("anticommutator", np.max(np.abs(product(A, B) + product(B, A) - trace_form(A, B) * np.eye(2))))
        note("invariance", abs(trace_form(A, commutator(B, C)) - trace_form(commutator(A, B), C)))
        lhs = trace_form(A, C) * trace_form(B, D) - trace_form(B, C) * trace_form(A, D)
        note("trace quotient", abs(lhs + 0.5 * trace_form(commutator(A, B), commutator(C, D))))
        dd = commutator(commutator(B, A), A).matrix()
        note("double bracket", np.max(np.abs(dd - (-2.0 * A.det * B.matrix() - 2.0 * A.matrix() @ B.matrix() @ A.matrix()))))
        Bp = project_perp(B, C)
        scale = 1.0 + A.norm2() * Bp.norm2() * C.norm2() * D.norm2()
        note("orthogonal bracket pairing",
             abs(trace_form(commutator(A, Bp), commutator(C, D)) + 2.0 * trace_form(A, C) * trace_form(Bp, D)) / scale)
        a, b = so21(A), so21(B)
        note("so(2,1) homomorphism", np.max(np.abs(so21(commutator(A, B)) - (a @ b - b @ a))))
        s, t = rng.uniform(-1, 1, 2)
        g = exp_traceless(A, s + t)
        group = max(group, g.distance(exp_traceless(A, s) @ exp_traceless(A, t)) / max(1.0, float(np.max(np.abs(g.matrix())))))
    top = max(worst.values())
    ok = top <= IDENTITY_TOL and group <= EXP_GROUP_TOL
    name = max(worst, key=worst.get)
    report(9, "algebraic identities", ok,
           f"{len(worst)} identities x {IDENTITY_SAMPLES}, worst {top:.2e} ({name}); exp group law {group:.2e}")
    assert ok


def test_criterion_10_abnormal():
    rng = make_rng(10)
    second = inv = 0.0
    for _ in range(10):
        X0, LR0, K = random_abnormal(rng)
        ser = abnormal_series(integrate_abnormal(X0, LR0, K, ABNORMAL_STEP, 1000), K)
        v = ser["v"]
        second = max(second, float(np.max(np.abs(v[2:] - 2.0 * v[1:-1] + v[:-2]))))
        inv = max(inv, float(np.ptp(ser["c_K"])), float(np.ptp(ser["c_R"])))
    bound = ABNORMAL_SECOND_DIFF * ABNORMAL_STEP ** 2
    ok = second <= bound and inv <= ABNORMAL_INVARIANT_TOL
    report(10, "abnormal inscribed system", ok,
           f"max |second difference of v| {second:.2e} (bound {bound:.0e}), c_K/c_R drift {inv:.2e}")
    assert ok


def test_criterion_11_hypotrochoid():
    h = Hypotrochoid(1.0, 0.3, 1.0 / 7.0)
    ts = np.linspace(0.0, 2.0 * math.pi * 7.0, 1000)
    wedge = float(np.max(np.abs(wedge_series(h, ts) - math.sqrt(3.0) / 2.0)))
    shift = h.period_shift_residual(ts)
    ok = wedge <= WEDGE_TOL and shift <= SHIFT_TOL
    report(11, "hypotrochoid multi-curve", ok, f"wedge deviation {wedge:.2e}, period shift {shift:.2e}")
    assert ok


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
