"""The lifted state-costate flow, its integrators and conserved quantities.

The extended state is (g, X, L1, LR) with g in SL2(R), X on the adjoint orbit
of J and the costates L1, LR in sl2(R).  For a control matrix Z write
P = Z / <Z, X>.  The flow is

    g'  = g X
    X'  = [P, X]
    L1' = [L1, X]
    LR' = [P, LR] - <LR, P> [P, X] + [-L1 + (3/2) lam J, X]

and the running cost is -(3/2) <J, X>.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._backend import kernels
from ._kernels import RECORD_SIZE, STATE_SIZE
from .controls import (
    ControlKind,
    ControlPoint,
    ControlSetSpec,
    StarViolation,
    STAR_EPS,
    VERTICES,
    control_matrix,
)
from .sl2 import J, R, GroupMatrix, Traceless, commutator, exp_traceless, trace_form

log = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)
GL_NODES_PER_UNIT = 32
FD_STEP = 1e-6

CSV_COLUMNS = (
    "time", "g11", "g12", "g21", "g22", "Xa", "Xb", "Xc",
    "L1a", "L1b", "L1c", "LRa", "LRb", "LRc", "u0", "u1", "u2",
    "H", "angmom", "cost",
)


class IntegrationError(RuntimeError):
    """The integrator could not continue (step underflow, bad input)."""


@dataclass(frozen=True)
class ExtendedState:
    g: GroupMatrix
    X: Traceless
    L1: Traceless
    LR: Traceless
    lambda_cost: float = -1.0
    cost: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.concatenate(
            [self.g.as_array(), self.X.as_array(), self.L1.as_array(), self.LR.as_array(), [self.cost]]
        )

    @classmethod
    def from_array(cls, v, lambda_cost: float = -1.0) -> "ExtendedState":
        v = np.asarray(v, dtype=float)
        return cls(
            GroupMatrix.from_array(v[0:4]),
            Traceless.from_array(v[4:7]),
            Traceless.from_array(v[7:10]),
            Traceless.from_array(v[10:13]),
            lambda_cost,
            float(v[13]) if v.shape[0] > 13 else 0.0,
        )

    @classmethod
    def singular_locus(cls, lambda_cost: float = -1.0) -> "ExtendedState":
        """(I, J, (3/2) lam J, 0): the circle extremal's initial state."""
        return cls(GroupMatrix.identity(), J, 1.5 * lambda_cost * J, Traceless(0.0, 0.0, 0.0), lambda_cost)

    def with_cost(self, cost: float) -> "ExtendedState":
        return ExtendedState(self.g, self.X, self.L1, self.LR, self.lambda_cost, cost)


@dataclass(frozen=True)
class IntegratorConfig:
    step: float = 1e-4
    method: str = "rk4"
    renormalize_every: int = 100
    tol: float = 1e-10
    record_every: int = 1

    def __post_init__(self):
        if not self.step > 0.0:
            raise ValueError("step must be positive")
        if self.method not in ("rk4", "rk45"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantPolicy:
    Z: Traceless
    name: str = "constant"

    @classmethod
    def from_point(cls, u: ControlPoint) -> "ConstantPolicy":
        return cls(control_matrix(u))

    def kernel_args(self):
        return 0, np.array([self.Z.a, self.Z.b, self.Z.c, 0.0, 0.0])


@dataclass(frozen=True)
class ClosedLoopPolicy:
    """Re-maximise the Hamiltonian over ``cset`` at every stage evaluation."""

    cset: ControlSetSpec
    name: str = "closed-loop"

    def kernel_args(self):
        if self.cset.kind is ControlKind.SIMPLEX:
            return 1, np.zeros(5)
        return 2, np.array([0.0, 0.0, 0.0, self.cset.alpha, self.cset.beta])


@dataclass(frozen=True)
class ScheduledPolicy:
    """Piecewise-constant controls: ``segments`` is a list of (Z, duration)."""

    segments: tuple[tuple[Traceless, float], ...]
    name: str = "schedule"

    @classmethod
    def from_vertices(cls, segments: Sequence[tuple[int, float]]) -> "ScheduledPolicy":
        return cls(tuple((control_matrix(VERTICES[v]), float(d)) for v, d in segments))

    @property
    def duration(self) -> float:
        return float(sum(d for _, d in self.segments))


Policy = ConstantPolicy | ClosedLoopPolicy | ScheduledPolicy


# ---------------------------------------------------------------------------
# Vector field (pure Python, also the reference for the kernels)
# ---------------------------------------------------------------------------

def reinhardt_field(s: ExtendedState, Z: Traceless) -> ExtendedState:
    """Time derivative of the extended state under the control matrix Z.

    The returned object reuses :class:`ExtendedState` as a container for
    tangent vectors; its ``g`` entry is g X and its ``cost`` entry is the
    running cost.
    """
    X = s.X
    xz = trace_form(X, Z)
    if xz > -STAR_EPS:
        raise StarViolation(xz)
    P = Z / xz
    PX = commutator(P, X)
    gX = GroupMatrix.from_array((s.g.matrix() @ X.matrix()).ravel())
    dLR = commutator(P, s.LR) - trace_form(s.LR, P) * PX + commutator(-s.L1 + 1.5 * s.lambda_cost * J, X)
    return ExtendedState(
        gX,
        PX,
        commutator(s.L1, X),
        dLR,
        s.lambda_cost,
        -1.5 * trace_form(J, X),
    )


def hamiltonian_value(s: ExtendedState, Z: Traceless) -> float:
    xz = trace_form(s.X, Z)
    if abs(xz) < STAR_EPS:
        raise StarViolation(xz)
    return trace_form(s.L1 - 1.5 * s.lambda_cost * J, s.X) - trace_form(s.LR, Z) / xz


def angular_momentum(s: ExtendedState) -> float:
    """<J, L1 + LR>, conserved for rotation-invariant control sets."""
    return trace_form(J, s.L1 + s.LR)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DriftReport:
    """Largest deviation from the initial value of each monitored quantity.

    ``lr_perp`` is the largest |<LR, X>| rather than a deviation.
    """

    det_X: float
    det_L1: float
    lr_perp: float
    hamiltonian: float
    angular_momentum: float

    def as_dict(self) -> dict:
        return {
            "det_X": self.det_X,
            "det_L1": self.det_L1,
            "lr_perp": self.lr_perp,
            "hamiltonian": self.hamiltonian,
            "angular_momentum": self.angular_momentum,
        }


@dataclass
class Trajectory:
    """Sampled solution of the extended flow.

    ``data`` has one row per sample: the 14 state entries (g, X, L1, LR,
    cost).  ``controls`` holds the control matrix (a, b, c) in force at each
    sample.
    """

    times: np.ndarray
    data: np.ndarray
    controls: np.ndarray
    lambda_cost: float = -1.0
    exited: bool = False
    policy: str = ""
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def cost(self) -> float:
        return float(self.data[-1, 13])

    def state(self, i: int) -> ExtendedState:
        return ExtendedState.from_array(self.data[i], self.lambda_cost)

    @property
    def initial(self) -> ExtendedState:
        return self.state(0)

    @property
    def final(self) -> ExtendedState:
        return self.state(-1)

    @property
    def X(self) -> np.ndarray:
        return self.data[:, 4:7]

    @property
    def g(self) -> np.ndarray:
        return self.data[:, 0:4]

    def control_points(self) -> np.ndarray:
        """(u0, u1, u2) for each sample, read off the control matrices."""
        a, c = self.controls[:, 0], self.controls[:, 2]
        rest = 1.0 - c
        return np.column_stack([c, 0.5 * (rest + SQRT3 * a), 0.5 * (rest - SQRT3 * a)])

    def series(self) -> dict[str, np.ndarray]:
        """Monitored scalar quantities at every sample."""
        d = self.data
        xa, xb, xc = d[:, 4], d[:, 5], d[:, 6]
        la, lb, lc = d[:, 7], d[:, 8], d[:, 9]
        ra, rb, rc = d[:, 10], d[:, 11], d[:, 12]
        za, zb, zc = self.controls[:, 0], self.controls[:, 1], self.controls[:, 2]

        def tf(a1, b1, c1, a2, b2, c2):
            return 2.0 * a1 * a2 + b1 * c2 + c1 * b2

        lam = self.lambda_cost
        xz = tf(xa, xb, xc, za, zb, zc)
        with np.errstate(divide="ignore", invalid="ignore"):
            ham = tf(la, lb + 1.5 * lam, lc - 1.5 * lam, xa, xb, xc) - tf(ra, rb, rc, za, zb, zc) / xz
        return {
            "det_X": -xa * xa - xb * xc,
            "det_L1": -la * la - lb * lc,
            "lr_perp": tf(ra, rb, rc, xa, xb, xc),
            "H": ham,
            "angmom": (lb + rb) - (lc + rc),
            "xz": xz,
        }

    def drift(self) -> DriftReport:
        s = self.series()

        def dev(v):
            return float(np.max(np.abs(v - v[0]))) if v.size else 0.0

        return DriftReport(
            det_X=dev(s["det_X"]),
            det_L1=dev(s["det_L1"]),
            lr_perp=float(np.max(np.abs(s["lr_perp"]))),
            hamiltonian=dev(s["H"]),
            angular_momentum=dev(s["angmom"]),
        )

    def rows(self) -> np.ndarray:
        s = self.series()
        u = self.control_points()
        return np.column_stack(
            [self.times, self.data[:, :13], u, s["H"], s["angmom"], self.data[:, 13]]
        )

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows():
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    def to_json(self, path=None) -> str:
        doc = {
            "columns": list(CSV_COLUMNS),
            "rows": [[float(v) for v in row] for row in self.rows()],
            "policy": self.policy,
            "exited": self.exited,
            "drift": self.drift().as_dict(),
        }
        text = json.dumps(doc, sort_keys=True)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    @classmethod
    def concatenate(cls, parts: Sequence["Trajectory"], policy: str = "") -> "Trajectory":
        """Join consecutive pieces, dropping the duplicated junction samples."""
        times = [parts[0].times]
        data = [parts[0].data]
        ctl = [parts[0].controls]
        for p in parts[1:]:
            times.append(p.times[1:])
            data.append(p.data[1:])
            ctl.append(p.controls[1:])
        return cls(
            np.concatenate(times),
            np.vstack(data),
            np.vstack(ctl),
            parts[0].lambda_cost,
            any(p.exited for p in parts),
            policy or parts[0].policy,
        )


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def _run_kernel(s0: np.ndarray, mode: int, params: np.ndarray, lam: float, t0: float,
                duration: float, cfg: IntegratorConfig, backend: str | None) -> tuple[Trajectory, bool]:
    nsteps = max(1, int(round(duration / cfg.step)))
    h = duration / nsteps
    k = kernels(backend)
    rec, nrec, status, _ = k.rk4_extended(
        np.ascontiguousarray(s0, dtype=float), mode, params, lam, t0, h, nsteps,
        cfg.renormalize_every, cfg.record_every,
    )
    rec = rec[:nrec]
    traj = Trajectory(rec[:, 0].copy(), rec[:, 1:1 + STATE_SIZE].copy(), rec[:, 15:18].copy(), lam, bool(status))
    return traj, bool(status)


def _run_rk45(s0: np.ndarray, mode: int, params: np.ndarray, lam: float, t0: float,
              duration: float, cfg: IntegratorConfig, backend: str | None) -> tuple[Trajectory, bool]:
    from scipy.integrate import solve_ivp

    k = kernels(backend)
    z = np.zeros(3)
    ds = np.zeros(STATE_SIZE)

    def rhs(t, y):
        k.select_control(y, mode, params, lam, z)
        k.reinhardt_rhs(y, z[0], z[1], z[2], lam, ds)
        return ds.copy()

    def star(t, y):
        k.select_control(y, mode, params, lam, z)
        return -(k.tform(y[4], y[5], y[6], z[0], z[1], z[2]))

    star.terminal = True
    sol = solve_ivp(rhs, (t0, t0 + duration), np.asarray(s0, dtype=float), method="RK45",
                    rtol=cfg.tol, atol=cfg.tol * 1e-2, events=star, dense_output=False)
    if sol.status == -1:
        raise IntegrationError(f"adaptive integration failed: {sol.message}")
    exited = sol.status == 1
    data = sol.y.T.copy()
    ctl = np.zeros((data.shape[0], 3))
    for i, row in enumerate(data):
        k.select_control(row, mode, params, lam, z)
        ctl[i] = z
    return Trajectory(sol.t.copy(), data, ctl, lam, exited), exited


def integrate(s0: ExtendedState, policy: Policy, t_end: float, cfg: IntegratorConfig | None = None,
              backend: str | None = None) -> Trajectory:
    """Integrate the extended flow from s0 over [0, t_end] under ``policy``.

    A trajectory that leaves the star domain is truncated at the last good
    sample and flagged ``exited``.  For scheduled policies ``t_end`` is
    clipped to the schedule length and every segment gets its own whole
    number of steps, so switches land on grid points.
    """
    cfg = cfg or IntegratorConfig()
    if not t_end > 0.0:
        raise ValueError("t_end must be positive")
    runner = _run_kernel if cfg.method == "rk4" else _run_rk45
    lam = s0.lambda_cost
    y0 = s0.as_array()
    if isinstance(policy, ScheduledPolicy):
        parts = []
        t0, remaining = 0.0, t_end
        for Z, dur in policy.segments:
            if remaining <= 0.0:
                break
            d = min(dur, remaining)
            piece, exited = runner(y0, 0, np.array([Z.a, Z.b, Z.c, 0.0, 0.0]), lam, t0, d, cfg, backend)
            parts.append(piece)
            if exited:
                break
            y0 = piece.data[-1].copy()
            t0 += d
            remaining -= d
        traj = Trajectory.concatenate(parts, policy.name)
    else:
        mode, params = policy.kernel_args()
        traj, _ = runner(y0, mode, params, lam, 0.0, t_end, cfg, backend)
        traj.policy = policy.name
    if traj.exited:
        log.info("trajectory left the star domain at t=%.6g", traj.t_end)
    return traj


def integrate_python(s0: ExtendedState, Z: Traceless, t_end: float, step: float) -> ExtendedState:
    """Plain RK4 on :func:`reinhardt_field`; slow, used as a cross-check."""
    n = max(1, int(round(t_end / step)))
    h = t_end / n
    lam = s0.lambda_cost

    def f(y):
        return reinhardt_field(ExtendedState.from_array(y, lam), Z).as_array()

    y = s0.as_array()
    for _ in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return ExtendedState.from_array(y, lam)


# ---------------------------------------------------------------------------
# Constant control in closed form
# ---------------------------------------------------------------------------

def _ad(gm: GroupMatrix, A: Traceless) -> Traceless:
    return gm.adjoint(A)


def _gauss_legendre(t: float) -> tuple[np.ndarray, np.ndarray]:
    n = GL_NODES_PER_UNIT * max(1, int(math.ceil(abs(t))))
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * t * (x + 1.0), 0.5 * t * w


def constant_control_solution(s0: ExtendedState, Z: Traceless, t: float) -> ExtendedState:
    """Extended state at time t under the constant control matrix Z.

    g and X come from matrix exponentials, L1 is transported by g, and LR is
    Ad_{exp(tP)} S(t) where

        S(t)   = LR(0) - [L_P(t) + l(t) P, X0]
        l(t)   = t <P, LR(0)> - <P, [int_0^t (t - r) L_P'(r) dr, X0]>
        L_P(t) = int_0^t L_P'(r) dr,
        L_P'(r) = Ad_{exp(-(X0+P) r)} L1(0) - (3/2) lam Ad_{exp(-P r)} J.

    Both integrals use Gauss-Legendre quadrature; the double integral that
    defines l is folded into a single weighted one.  The running cost is
    included.
    """
    X0 = s0.X
    xz = trace_form(X0, Z)
    if xz > -STAR_EPS:
        raise StarViolation(xz)
    P = Z / xz
    lam = s0.lambda_cost
    if t == 0.0:
        return s0
    eXP = exp_traceless(X0 + P, t)
    eP = exp_traceless(P, t)
    eP_inv = exp_traceless(P, -t)
    g_rel = eXP @ eP_inv
    X = _ad(eP, X0)
    L1 = _ad(g_rel.inverse(), s0.L1)

    nodes, weights = _gauss_legendre(t)
    LP = np.zeros(3)
    LPw = np.zeros(3)
    costJ = 0.0
    for r, w in zip(nodes, weights):
        d = _ad(exp_traceless(X0 + P, -r), s0.L1) - 1.5 * lam * _ad(exp_traceless(P, -r), J)
        v = d.as_array()
        LP += w * v
        LPw += w * (t - r) * v
        costJ += w * trace_form(J, _ad(exp_traceless(P, r), X0))
    LP_t = Traceless.from_array(LP)
    LPw_t = Traceless.from_array(LPw)
    ell = t * trace_form(P, s0.LR) - trace_form(P, commutator(LPw_t, X0))
    S = s0.LR - commutator(LP_t + ell * P, X0)
    LR = _ad(eP, S)
    cost = s0.cost - 1.5 * costJ
    return ExtendedState(s0.g @ g_rel, X, L1, LR, lam, cost)


def constant_control_S(s0: ExtendedState, Z: Traceless, t: float) -> Traceless:
    """S(t) = Ad_{exp(-tP)} LR(t) for the constant control Z."""
    P = Z / trace_form(s0.X, Z)
    return _ad(exp_traceless(P, -t), constant_control_solution(s0, Z, t).LR)


# ---------------------------------------------------------------------------
# Endpoint conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransversalityResiduals:
    g: float
    X: float
    LR: float
    L1: float

    @property
    def max(self) -> float:
        return max(self.g, self.X, self.LR)


def transversality_residuals(s0: ExtendedState, sf: ExtendedState, g0: GroupMatrix | None = None) -> TransversalityResiduals:
    """Max-abs residuals of g(t_f) = g(0) R and of the R-conjugation conditions.

    L1 is reported separately; its condition follows from the one on g.
    """
    g0 = g0 or s0.g
    Rinv = R.inverse()

    def conj(A):
        return Rinv.adjoint(A)

    def diff(A, B):
        return float(np.max(np.abs(A.as_array() - B.as_array())))

    return TransversalityResiduals(
        g=(g0 @ R).distance(sf.g),
        X=diff(sf.X, conj(s0.X)),
        LR=diff(sf.LR, conj(s0.LR)),
        L1=diff(sf.L1, conj(s0.L1)),
    )


# ---------------------------------------------------------------------------
# Abnormal system on the inscribed disk
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AbnormalInvariants:
    c_K: float
    c_R: float


def abnormal_inscribed_field(X: Traceless, LR: Traceless, K: Traceless) -> tuple[Traceless, Traceless]:
    """(X', LR') with X' = -[LR, X]/w, LR' = [LR - K, X] and w = sqrt(2<LR, LR>)."""
    w2 = 2.0 * trace_form(LR, LR)
    if w2 <= 1e-28:
        raise ArithmeticError("LR vanishes: the abnormal system is singular here")
    w = math.sqrt(w2)
    return -commutator(LR, X) / w, commutator(LR - K, X)


def uvw(X: Traceless, LR: Traceless, K: Traceless) -> tuple[float, float, float]:
    w2 = 2.0 * trace_form(LR, LR)
    if w2 <= 1e-28:
        raise ArithmeticError("LR vanishes: the abnormal system is singular here")
    return trace_form(X, K), trace_form(commutator(LR, X), K), math.sqrt(w2)


def abnormal_invariants(LR: Traceless, K: Traceless) -> AbnormalInvariants:
    return AbnormalInvariants(trace_form(K, K), trace_form(LR, LR) - 2.0 * trace_form(K, LR))


def integrate_abnormal(X0: Traceless, LR0: Traceless, K: Traceless, step: float, nsteps: int,
                       backend: str | None = None) -> np.ndarray:
    """RK4 samples of (X, LR) as an (nsteps+1, 6) array."""
    y0 = np.concatenate([X0.as_array(), LR0.as_array()])
    return kernels(backend).rk4_abnormal(y0, K.as_array(), step, nsteps)


def abnormal_series(samples: np.ndarray, K: Traceless) -> dict[str, np.ndarray]:
    """u, v, w, c_K, c_R along an array returned by :func:`integrate_abnormal`."""
    xa, xb, xc = samples[:, 0], samples[:, 1], samples[:, 2]
    ra, rb, rc = samples[:, 3], samples[:, 4], samples[:, 5]
    ka, kb, kc = K.a, K.b, K.c

    def tf(a1, b1, c1, a2, b2, c2):
        return 2.0 * a1 * a2 + b1 * c2 + c1 * b2

    ma = rb * xc - rc * xb
    mb = 2.0 * (ra * xb - rb * xa)
    mc = 2.0 * (rc * xa - ra * xc)
    rr = tf(ra, rb, rc, ra, rb, rc)
    return {
        "u": tf(xa, xb, xc, ka, kb, kc),
        "v": tf(ma, mb, mc, ka, kb, kc),
        "w": np.sqrt(2.0 * rr),
        "c_K": np.full(xa.shape, tf(ka, kb, kc, ka, kb, kc)),
        "c_R": rr - 2.0 * tf(ka, kb, kc, ra, rb, rc),
    }


# ---------------------------------------------------------------------------
# Hamiltonian structure checks
# ---------------------------------------------------------------------------

def functional_derivative(F: Callable[[Traceless], float], A: Traceless, h: float = FD_STEP) -> Traceless:
    """The element D with dF_A(V) = <D, V>, by central differences."""
    base = A.as_array()
    grad = np.zeros(3)
    for i in range(3):
        step = h * (1.0 + abs(base[i]))
        e = np.zeros(3)
        e[i] = step
        grad[i] = (F(Traceless.from_array(base + e)) - F(Traceless.from_array(base - e))) / (2.0 * step)
    # <D, V> = 2 Da Va + Db Vc + Dc Vb
    return Traceless(grad[0] / 2.0, grad[2], grad[1])


def lie_poisson_hamiltonian(Z: Traceless) -> Callable[[Traceless], float]:
    """h(X) = -(<X,X>/2) log(<X,X>/<X,Z>); on det X = 1 this is log 2 - log(-<X,Z>)."""

    def h(X: Traceless) -> float:
        xx = trace_form(X, X)
        return -0.5 * xx * math.log(xx / trace_form(X, Z))

    return h


def lie_poisson_residual(X: Traceless, Z: Traceless, reduced: bool = False) -> float:
    """max |X' + [dh/dX, X]| for X' = [P, X].

    With ``reduced`` the Hamiltonian is -log(-<X, Z>), which agrees with the
    full one on det X = 1 up to a constant.
    """
    if reduced:
        def h(Y):
            return -math.log(-trace_form(Y, Z))
    else:
        h = lie_poisson_hamiltonian(Z)
    D = functional_derivative(h, X)
    P = Z / trace_form(Z, X)
    r = commutator(P, X) + commutator(D, X)
    return float(np.max(np.abs(r.as_array())))


def extended_bracket(F, G, X: Traceless, L1: Traceless, L2: Traceless) -> float:
    """{F, G} on (X, L1, L2): -<L1, [dF/dL1, dG/dL1]> + <dF/dX, dG/dL2> - <dF/dL2, dG/dX>.

    F and G are callables of (X, L1, L2).
    """

    def parts(H):
        dX = functional_derivative(lambda A: H(A, L1, L2), X)
        d1 = functional_derivative(lambda A: H(X, A, L2), L1)
        d2 = functional_derivative(lambda A: H(X, L1, A), L2)
        return dX, d1, d2

    fX, f1, f2 = parts(F)
    gX, g1, g2 = parts(G)
    return -trace_form(L1, commutator(f1, g1)) + trace_form(fX, g2) - trace_form(f2, gX)


def hamiltonian_l2(Z: Traceless, lambda_cost: float = -1.0):
    """The Hamiltonian written on (X, L1, L2) with LR = [L2, X]."""

    def H(X, L1, L2):
        return trace_form(L1 - 1.5 * lambda_cost * J, X) - trace_form(commutator(L2, X), Z) / trace_form(X, Z)

    return H


def l2_from_lr(X: Traceless, LR: Traceless) -> Traceless:
    """The L2 orthogonal to X with [L2, X] = LR, assuming det X = 1 and <LR, X> = 0."""
    return -commutator(LR, X) / 4.0


def bracket_rate_residual(F, s: ExtendedState, Z: Traceless) -> float:
    """|dF/dt - {F, H}| for F a function of (X, L1, LR) at state s.

    dF/dt is evaluated with :func:`reinhardt_field` by the chain rule; the
    bracket treats F as a function of (X, L1, L2) through LR = [L2, X].
    """
    L2 = l2_from_lr(s.X, s.LR)
    d = reinhardt_field(s, Z)
    fX = functional_derivative(lambda A: F(A, s.L1, s.LR), s.X)
    f1 = functional_derivative(lambda A: F(s.X, A, s.LR), s.L1)
    fR = functional_derivative(lambda A: F(s.X, s.L1, A), s.LR)
    rate = trace_form(fX, d.X) + trace_form(f1, d.L1) + trace_form(fR, d.LR)

    def Fl2(X, L1, L2_):
        return F(X, L1, commutator(L2_, X))

    br = extended_bracket(Fl2, hamiltonian_l2(Z, s.lambda_cost), s.X, s.L1, L2)
    return abs(rate - br)
