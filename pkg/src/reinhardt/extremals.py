"""Candidate optimisers: bang-bang runs, the circle, smoothed (6k+2)-gons.

Also reconstructs the boundary of the disc K from the group curve g(t) and
builds the hypotrochoid multi-curves.  Areas are normalised so that the
critical hexagon has area sqrt(12); the packing density of K is then
area(K) / sqrt(12).
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .controls import VERTICES, control_matrix, hamiltonian
from .dynamics import (
    ExtendedState,
    IntegratorConfig,
    ScheduledPolicy,
    Trajectory,
    TransversalityResiduals,
    constant_control_solution,
    integrate,
    transversality_residuals,
)
from .halfplane import phi, phi_inv, star_conditions
from .sl2 import J, R, GroupMatrix, Traceless, exp_traceless, sixth_root, trace_form, wedge

log = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)
SQRT12 = math.sqrt(12.0)
HEX_WEDGE = SQRT3 / 2.0
OCTAGON_DENSITY = (8.0 - math.sqrt(32.0) - math.log(2.0)) / (math.sqrt(8.0) - 1.0)
CIRCLE_DENSITY = math.pi / SQRT12
CLOSURE_TOL = 1e-6


class ShootingError(RuntimeError):
    """The shooting solve did not converge; ``best`` holds the best residual."""

    def __init__(self, message: str, best: float):
        super().__init__(f"{message} (best residual {best:.3e})")
        self.best = best


class StarExit(RuntimeError):
    def __init__(self, t: float):
        super().__init__(f"trajectory left the star domain at t={t:.6g}")
        self.t = t


@dataclass(frozen=True)
class BangBangSchedule:
    """Vertex controls held for given durations."""

    segments: tuple[tuple[int, float], ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("empty schedule")
        for v, d in self.segments:
            if v not in (0, 1, 2):
                raise ValueError(f"vertex index must be 0, 1 or 2, got {v}")
            if not d > 0.0:
                raise ValueError(f"durations must be positive, got {d}")

    @property
    def t_f(self) -> float:
        return float(sum(d for _, d in self.segments))

    @property
    def switch_times(self) -> np.ndarray:
        return np.cumsum([d for _, d in self.segments])[:-1]

    def policy(self) -> ScheduledPolicy:
        return ScheduledPolicy.from_vertices(self.segments)

    @classmethod
    def symmetric(cls, k: int, tau: float, order: int = 1) -> "BangBangSchedule":
        """Half a side on e0, then 3k full sides cycling through the vertices, then half a side.

        The total time is (3k + 1) tau.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        segs = [(0, tau / 2.0)]
        v = 0
        for _ in range(3 * k):
            v = (v + order) % 3
            segs.append((v, tau))
        v = (v + order) % 3
        segs.append((v, tau / 2.0))
        return cls(tuple(segs))


# ---------------------------------------------------------------------------
# Closed-form piecewise runs
# ---------------------------------------------------------------------------

def _segment_end(g: GroupMatrix, X: Traceless, vertex: int, d: float) -> tuple[GroupMatrix, Traceless]:
    Z = control_matrix(VERTICES[vertex])
    P = Z / trace_form(Z, X)
    g_new = g @ exp_traceless(X + P, d) @ exp_traceless(P, -d)
    return g_new, exp_traceless(P, d).adjoint(X)


def state_run(X0: Traceless, schedule: BangBangSchedule, g0: GroupMatrix | None = None) -> tuple[GroupMatrix, Traceless]:
    """(g, X) at the end of the schedule, using only matrix exponentials."""
    g = g0 or GroupMatrix.identity()
    X = X0
    for v, d in schedule.segments:
        g, X = _segment_end(g, X, v, d)
    return g, X


def bang_bang_run(X0: Traceless, schedule: BangBangSchedule, costate0: tuple[Traceless, Traceless] | None = None,
                  g0: GroupMatrix | None = None, samples_per_segment: int = 32,
                  lambda_cost: float = -1.0) -> Trajectory:
    """Sample the closed-form solution segment by segment.

    Every sample is checked against the star conditions; leaving the star
    domain raises :class:`StarExit` with the first offending sample time.
    """
    if not star_conditions(X0):
        raise ValueError("X0 violates the star conditions")
    zero = Traceless(0.0, 0.0, 0.0)
    L1, LR = costate0 if costate0 is not None else (zero, zero)
    s = ExtendedState(g0 or GroupMatrix.identity(), X0, L1, LR, lambda_cost)
    times, rows, ctl = [], [], []
    t0 = 0.0
    for v, d in schedule.segments:
        Z = control_matrix(VERTICES[v])
        for i in range(samples_per_segment):
            ti = d * i / samples_per_segment
            si = constant_control_solution(s, Z, ti) if i else s
            if not star_conditions(si.X):
                raise StarExit(t0 + ti)
            times.append(t0 + ti)
            rows.append(si.as_array())
            ctl.append(Z.as_array())
        s = constant_control_solution(s, Z, d)
        t0 += d
    if not star_conditions(s.X):
        raise StarExit(t0)
    times.append(t0)
    rows.append(s.as_array())
    ctl.append(control_matrix(VERTICES[schedule.segments[-1][0]]).as_array())
    return Trajectory(np.array(times), np.array(rows), np.array(ctl), lambda_cost, False, "bang-bang")


def switch_states(X0: Traceless, schedule: BangBangSchedule, costate0: tuple[Traceless, Traceless],
                  lambda_cost: float = -1.0) -> list[ExtendedState]:
    """Extended states at t = 0, at every switch and at t_f."""
    L1, LR = costate0
    s = ExtendedState(GroupMatrix.identity(), X0, L1, LR, lambda_cost)
    out = [s]
    for v, d in schedule.segments:
        s = constant_control_solution(s, control_matrix(VERTICES[v]), d)
        out.append(s)
    return out


# ---------------------------------------------------------------------------
# Circle
# ---------------------------------------------------------------------------

@dataclass
class CircleExtremal:
    trajectory: Trajectory
    density: float
    cost: float
    residuals: TransversalityResiduals
    hamiltonian_max: float


def circle_extremal(samples: int = 1000) -> CircleExtremal:
    """The singular extremal: constant centre control from the singular locus.

    X stays at J and g(t) = exp(Jt), which reaches R at t_f = pi/3.
    """
    t_f = math.pi / 3.0
    s0 = ExtendedState.singular_locus(-1.0)
    Z = J / 3.0
    times = np.linspace(0.0, t_f, samples + 1)
    rows = []
    for t in times:
        g = exp_traceless(J, t)
        rows.append(ExtendedState(g, J, s0.L1, s0.LR, -1.0, 3.0 * t).as_array())
    data = np.array(rows)
    traj = Trajectory(times, data, np.tile(Z.as_array(), (times.size, 1)), -1.0, False, "circle")
    sf = traj.final
    res = transversality_residuals(s0, sf)
    ham = max(abs(hamiltonian(ExtendedState.from_array(r).X, s0.L1, s0.LR, Z)) for r in data[:: max(1, samples // 50)])
    return CircleExtremal(traj, sf.cost / SQRT12, sf.cost, res, ham)


# ---------------------------------------------------------------------------
# Smoothed (6k+2)-gons
# ---------------------------------------------------------------------------

@dataclass
class OctagonResult:
    k: int
    y0: float
    tau: float
    schedule: BangBangSchedule
    X0: Traceless
    L1: Traceless
    LR: Traceless
    trajectory: Trajectory
    density: float
    shooting_residual: float
    costate_residual: float
    residuals: TransversalityResiduals
    hamiltonian_max: float
    argmax_violation: float
    meta: dict = field(default_factory=dict)

    @property
    def max_distance_to_i(self) -> float:
        """Largest Euclidean distance from i of the half-plane image of X(t)."""
        X = self.trajectory.X
        d = -X[:, 0] ** 2 - X[:, 1] * X[:, 2]
        z = (X[:, 0] + 1j * np.sqrt(d)) / X[:, 2]
        return float(np.max(np.abs(z - 1j)))


_SHOOT_GUESSES = ((1.15, 0.25), (1.1, 0.2), (1.05, 0.1), (1.03, 0.06), (1.02, 0.04))


def _shooting_residual(p, k: int, order: int) -> np.ndarray:
    y0, tau = p
    if not (y0 > 1.0 / SQRT3 and tau > 0.0):
        return np.full(7, 1e3)
    X0 = phi((0.0, y0))
    sched = BangBangSchedule.symmetric(k, tau, order)
    try:
        g, X = state_run(X0, sched)
    except (ZeroDivisionError, ValueError, OverflowError):
        return np.full(7, 1e3)
    target = R.inverse().adjoint(X0)
    return np.concatenate([(X - target).as_array(), (g.as_array() - R.as_array())])


def _costate_conditions(X0: Traceless, sched: BangBangSchedule, p: np.ndarray, lam: float) -> np.ndarray:
    L1 = Traceless.from_array(p[:3])
    LR = Traceless.from_array(p[3:])
    states = switch_states(X0, sched, (L1, LR), lam)
    Zs = [control_matrix(VERTICES[v]) for v, _ in sched.segments]
    rows = [trace_form(LR, X0), hamiltonian(X0, L1, LR, Zs[0], lam)]
    rows += list((states[-1].LR - R.inverse().adjoint(LR)).as_array())
    # H ties at interior switches only; the end of the last segment is not a switch.
    for i in range(1, len(sched.segments)):
        s = states[i]
        rows.append(hamiltonian(s.X, s.L1, s.LR, Zs[i - 1], lam) - hamiltonian(s.X, s.L1, s.LR, Zs[i], lam))
    return np.array(rows)


def solve_costate(X0: Traceless, sched: BangBangSchedule, lambda_cost: float = -1.0) -> tuple[Traceless, Traceless, float]:
    """Initial costates making the schedule a Pontryagin extremal.

    The conditions are affine in (L1(0), LR(0)) once lambda is fixed:
    LR(0) orthogonal to X0, H(0) = 0, LR(t_f) = R^{-1} LR(0) R and equal
    Hamiltonians on both sides of every switch.  The overdetermined system
    is solved by least squares; the returned residual measures consistency.
    """
    b = _costate_conditions(X0, sched, np.zeros(6), lambda_cost)
    A = np.column_stack([_costate_conditions(X0, sched, e, lambda_cost) - b for e in np.eye(6)])
    p, *_ = np.linalg.lstsq(A, -b, rcond=None)
    res = float(np.max(np.abs(_costate_conditions(X0, sched, p, lambda_cost))))
    return Traceless.from_array(p[:3]), Traceless.from_array(p[3:]), res


def octagon_shoot(k: int = 1, order: int = 1, tol: float = 1e-10, cfg: IntegratorConfig | None = None,
                  backend: str | None = None) -> OctagonResult:
    """Shoot for the Z/3-symmetric bang-bang extremal with 3k + 2 segments.

    The unknowns are the starting point iy0 on the symmetry axis and the side
    time tau.  Once (g, X) close up modulo R, the costate is found by
    :func:`solve_costate` and the full extended system is integrated with
    RK4 to audit H = 0, the vertex choice and the transversality conditions.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    best = None
    for guess in _SHOOT_GUESSES:
        sol = least_squares(_shooting_residual, guess, args=(k, order), xtol=1e-15, ftol=1e-15, gtol=1e-15)
        r = float(np.max(np.abs(sol.fun)))
        if best is None or r < best[1]:
            best = (sol, r)
        if r < tol:
            break
    sol, r = best
    if r >= tol:
        raise ShootingError(f"no symmetric {6 * k + 2}-gon found", r)
    y0, tau = (float(v) for v in sol.x)
    X0 = phi((0.0, y0))
    sched = BangBangSchedule.symmetric(k, tau, order)
    L1, LR, cres = solve_costate(X0, sched)
    if cres > 1e-8:
        raise ShootingError("costate conditions are inconsistent", cres)

    cfg = cfg or IntegratorConfig()
    s0 = ExtendedState(GroupMatrix.identity(), X0, L1, LR, -1.0)
    traj = integrate(s0, sched.policy(), sched.t_f, cfg, backend)
    ser = traj.series()
    data = traj.data
    hs = np.empty((len(traj), 3))
    for v in range(3):
        Z = control_matrix(VERTICES[v])
        for i in range(len(traj)):
            hs[i, v] = hamiltonian(Traceless.from_array(data[i, 4:7]), Traceless.from_array(data[i, 7:10]),
                                   Traceless.from_array(data[i, 10:13]), Z)
    viol = float(np.max(np.max(hs, axis=1) - ser["H"]))
    sf = traj.final
    res = transversality_residuals(s0, sf)
    # Cost from the closed form, which has no step-size error.
    cost = switch_states(X0, sched, (L1, LR))[-1].cost
    return OctagonResult(
        k=k, y0=y0, tau=tau, schedule=sched, X0=X0, L1=L1, LR=LR, trajectory=traj,
        density=cost / SQRT12, shooting_residual=r, costate_residual=cres, residuals=res,
        hamiltonian_max=float(np.max(np.abs(ser["H"]))), argmax_violation=viol,
        meta={"nfev": int(sol.nfev), "rk4_cost": traj.cost},
    )


# ---------------------------------------------------------------------------
# Boundary reconstruction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiCurveSample:
    t: float
    points: np.ndarray  # (6, 2): sigma_0 .. sigma_5

    def residuals(self) -> dict[str, float]:
        p = self.points
        s = max(float(np.max(np.abs(p[j] + p[(j + 2) % 6] + p[(j + 4) % 6]))) for j in range(6))
        c = max(float(np.max(np.abs(p[j] + p[(j + 3) % 6]))) for j in range(6))
        w = max(abs(wedge(p[j], p[(j + 2) % 6]) - HEX_WEDGE) for j in range(6))
        return {"sum": s, "central": c, "wedge": w}

    def is_valid(self, tol: float = 1e-9) -> bool:
        return all(v <= tol for v in self.residuals().values())

    def row(self) -> list[float]:
        return [self.t] + [float(v) for v in self.points.ravel()]


@dataclass
class BoundaryReconstruction:
    samples: list[MultiCurveSample]
    polygon: np.ndarray
    area: float
    closure_residual: float
    closed: bool

    @property
    def density(self) -> float:
        return self.area / SQRT12


def multi_point(g: GroupMatrix, t: float = 0.0) -> MultiCurveSample:
    return MultiCurveSample(t, np.array([g.apply(sixth_root(j)) for j in range(6)]))


def shoelace(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def reconstruct_boundary(traj: Trajectory, stride: int = 1) -> BoundaryReconstruction:
    """Boundary of K traced by sigma_j(t) = g(t) e_j over one period [0, t_f].

    Using g(t + t_f) = g(t) R, the curve sigma_0 on [0, 6 t_f] is the
    concatenation of the arcs sigma_j([0, t_f]) for j = 0..5.  The area comes
    from the shoelace formula; the closure residual compares the end of each
    arc with the start of the next.
    """
    G = traj.g[::stride]
    if (traj.g.shape[0] - 1) % stride:
        G = np.vstack([G, traj.g[-1]])
    times = np.append(traj.times[::stride], traj.times[-1])[: G.shape[0]]
    E = np.array([sixth_root(j) for j in range(6)])
    # pts[i, j] = g_i e_j
    pts = np.stack([G[:, 0:1] * E[:, 0] + G[:, 1:2] * E[:, 1], G[:, 2:3] * E[:, 0] + G[:, 3:4] * E[:, 1]], axis=-1)
    samples = [MultiCurveSample(float(t), pts[i]) for i, t in enumerate(times)]
    arcs = [pts[:-1, j] for j in range(6)]
    poly = np.vstack(arcs)
    closure = max(float(np.max(np.abs(pts[-1, j] - pts[0, (j + 1) % 6]))) for j in range(6))
    closed = closure <= CLOSURE_TOL
    if not closed:
        log.warning("reconstructed boundary does not close (residual %.3e)", closure)
    return BoundaryReconstruction(samples, poly, shoelace(poly), closure, closed)


# ---------------------------------------------------------------------------
# Hypotrochoids
# ---------------------------------------------------------------------------

ZETA = cmath.exp(2j * math.pi / 3.0)


@dataclass(frozen=True)
class Hypotrochoid:
    """sigma_{2j}(t) = s (R e^{it} zeta^j + r e^{-i rho t} zeta^{-j}), mirrored if |r| > |R|.

    The scale s makes sigma_0 wedge sigma_2 = sqrt3/2.  When |r| > |R| the
    wedge of the raw curves is negative and the curves are reflected in the
    real axis, which restores the orientation.
    """

    R: float
    r: float
    rho: float

    def __post_init__(self):
        if abs(abs(self.r) - abs(self.R)) < 1e-14 * max(1.0, abs(self.R)):
            raise ValueError("|r| = |R| gives a degenerate (zero) wedge")

    @classmethod
    def from_roulette(cls, R1: float, r1: float, d1: float) -> "Hypotrochoid":
        """Parameters of the rolling-circle construction (fixed R1, rolling r1, pen d1)."""
        return cls(R1 - r1, d1, (R1 - r1) / r1)

    @property
    def scale(self) -> float:
        return 1.0 / math.sqrt(abs(self.R ** 2 - self.r ** 2))

    @property
    def mirrored(self) -> bool:
        return self.r ** 2 > self.R ** 2

    def even(self, t) -> np.ndarray:
        """Complex sigma_0, sigma_2, sigma_4 at t (shape (3,) + shape(t))."""
        t = np.asarray(t, dtype=float)
        j = np.arange(3).reshape((3,) + (1,) * t.ndim)
        z = self.scale * (self.R * np.exp(1j * t) * ZETA ** j + self.r * np.exp(-1j * self.rho * t) * ZETA ** (-j))
        return np.conj(z) if self.mirrored else z

    def period_shift_residual(self, t) -> float:
        """max |sigma_{2j}(t + 2 pi/(3 rho)) - sigma_{2j+2}(t)|.

        Zero exactly when 1/rho = 1 mod 3.
        """
        a = self.even(np.asarray(t, dtype=float) + 2.0 * math.pi / (3.0 * self.rho))
        b = np.roll(self.even(t), -1, axis=0)
        return float(np.max(np.abs(a - b)))

    def group_element(self, t: float) -> GroupMatrix:
        """The g in SL2(R) with g e_0 = sigma_0(t) and g e_2 = sigma_2(t)."""
        s0, s2 = self.even(t)[:2]
        e2 = sixth_root(2)
        c1 = np.array([s0.real, s0.imag])
        c2 = (np.array([s2.real, s2.imag]) - e2[0] * c1) / e2[1]
        return GroupMatrix(c1[0], c2[0], c1[1], c2[1])


def hypotrochoid_multicurve(R_: float, r: float, rho: float, t: float) -> MultiCurveSample:
    h = Hypotrochoid(R_, r, rho)
    ev = h.even(t)
    pts = np.empty((6, 2))
    for j in range(3):
        pts[2 * j] = (ev[j].real, ev[j].imag)
        pts[(2 * j + 3) % 6] = (-ev[j].real, -ev[j].imag)
    return MultiCurveSample(float(t), pts)


def wedge_series(h: Hypotrochoid, t) -> np.ndarray:
    s0, s2, _ = h.even(t)
    return np.imag(np.conj(s0) * s2)


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

def _polyline(points: np.ndarray, to_px, color: str, width: float = 1.5) -> str:
    pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in (to_px(p) for p in points))
    return f'<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{pts}"/>'


def halfplane_svg(curves: Sequence[np.ndarray], size: int = 480, y_max: float = 2.0) -> str:
    """Half-plane curves (arrays of complex z) over the star-domain outline."""
    x_min, x_max = -0.8, 0.8
    sx = size / (x_max - x_min)
    sy = size / y_max

    def to_px(p):
        return ((p[0] - x_min) * sx, size - p[1] * sy)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
             '<rect width="100%" height="100%" fill="white"/>']
    a = 1.0 / SQRT3
    th = np.linspace(math.pi / 6.0, 5.0 * math.pi / 6.0, 200)
    arc = np.column_stack([a * np.cos(th), a * np.sin(th)])
    parts.append(_polyline(arc, to_px, "#888"))
    for x in (-a, a):
        parts.append(_polyline(np.array([[x, 0.5], [x, y_max]]), to_px, "#888"))
    palette = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
    for i, z in enumerate(curves):
        z = np.asarray(z)
        parts.append(_polyline(np.column_stack([z.real, z.imag]), to_px, palette[i % len(palette)]))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def boundary_svg(polygon: np.ndarray, size: int = 480) -> str:
    """The reconstructed boundary with the unit circle for reference."""
    ext = max(1.2, float(np.max(np.abs(polygon))) * 1.1)
    s = size / (2.0 * ext)

    def to_px(p):
        return ((p[0] + ext) * s, (ext - p[1]) * s)

    th = np.linspace(0.0, 2.0 * math.pi, 361)
    circ = np.column_stack([np.cos(th), np.sin(th)])
    closed = np.vstack([polygon, polygon[:1]])
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        '<rect width="100%" height="100%" fill="white"/>',
        _polyline(circ, to_px, "#bbb", 1.0),
        _polyline(closed, to_px, "#1f77b4", 1.5),
        "</svg>",
    ]) + "\n"


def trajectory_halfplane(traj: Trajectory) -> np.ndarray:
    """Half-plane image z(t) of X(t)."""
    X = traj.X
    d = -X[:, 0] ** 2 - X[:, 1] * X[:, 2]
    return (X[:, 0] + 1j * np.sqrt(np.maximum(d, 0.0))) / X[:, 2]
