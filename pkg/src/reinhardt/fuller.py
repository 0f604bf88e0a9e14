"""Behaviour near the singular locus: hyperboloid coordinates and Fuller chains.

Hyperboloid coordinates write the Cayley images of the state and costates
as

    X   -> delta = [w],                  p = w
    L1  -> delta = -sqrt(d) [b],         p = sqrt(d) b
    LR  -> delta = R(c, w) / [w],        p = c

with [p] = sqrt(1 + |p|^2) and R(u, v) = Re(conj(u) v).  These satisfy
det X = 1, det L1 = d and <LR, X> = 0 automatically, and the singular locus
sits at w = b = c = 0 with d = 9/4.

Near that point the flow is approximated by the length-3 Fuller chain
z3' = z2, z2' = z1, z1' = -i z3/|z3| through

    z1 = w / beta1,   z2 = -i b / (2 beta1),   z3 = c / (6 beta1).

Throughout, arrays of chain variables are stored as (z1, ..., zn).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._backend import kernels
from .controls import ControlSetSpec, StarViolation, U_C, boundary_control, maximize_disk
from .dynamics import ClosedLoopPolicy, ExtendedState, IntegratorConfig, integrate, reinhardt_field
from .sl2 import GroupMatrix, Su11, Traceless, cayley, cayley_inverse

SINGULAR_D = 9.0 / 4.0
FD_REL = 1e-6


class BranchError(ValueError):
    """Raised for costates outside the supported det L1 > 0, lower-sheet branch."""


def bracket(p: complex) -> float:
    """[p] = sqrt(1 + |p|^2)."""
    return math.sqrt(1.0 + abs(p) ** 2)


def sesq(u: complex, v: complex) -> float:
    """R(u, v) = Re(conj(u) v)."""
    return (u.conjugate() * v).real


# ---------------------------------------------------------------------------
# Hyperboloid coordinates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HyperboloidState:
    w: complex
    b: complex
    c: complex
    d: float = SINGULAR_D

    def __post_init__(self):
        if not self.d > 0.0:
            raise BranchError(f"only det L1 = d > 0 is supported, got d={self.d}")

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.b, self.c], dtype=complex)


def to_hyperboloid(X: Traceless, L1: Traceless, LR: Traceless) -> HyperboloidState:
    sx = cayley(X)
    if sx.delta <= 0.0:
        raise BranchError("X is not on the upper sheet (need c > b)")
    s1 = cayley(L1)
    d = s1.det
    if d <= 0.0:
        raise BranchError(f"det L1 = {d} is not positive")
    if s1.delta >= 0.0:
        raise BranchError("L1 lies on the upper sheet; only the lower sheet is supported")
    return HyperboloidState(sx.p, s1.p / math.sqrt(d), cayley(LR).p, d)


def from_hyperboloid(h: HyperboloidState) -> tuple[Traceless, Traceless, Traceless]:
    rd = math.sqrt(h.d)
    bw = bracket(h.w)
    X = cayley_inverse(Su11(bw, h.w))
    L1 = cayley_inverse(Su11(-rd * bracket(h.b), rd * h.b))
    LR = cayley_inverse(Su11(sesq(h.c, h.w) / bw, h.c))
    return X, L1, LR


def extended_state(h: HyperboloidState, g: GroupMatrix | None = None) -> ExtendedState:
    X, L1, LR = from_hyperboloid(h)
    return ExtendedState(g or GroupMatrix.identity(), X, L1, LR, -1.0)


def star_margin(w: complex, z: complex, beta1: float) -> float:
    """mu(w, z) = [w] - beta1 R(w, z), equal to <X, Z>/(-2 alpha)."""
    return bracket(w) - beta1 * sesq(w, z)


def hyperboloid_field(h: HyperboloidState, cset: ControlSetSpec, zstar: complex) -> tuple[complex, complex, complex]:
    """(b', w', c') for the control at boundary angle zstar of the disk ``cset``."""
    beta1 = cset.beta1
    w, b, c = h.w, h.b, h.c
    rd = math.sqrt(h.d)
    bw, bb = bracket(w), bracket(b)
    mu = star_margin(w, zstar, beta1)
    if mu <= 0.0:
        raise StarViolation(-2.0 * cset.alpha * mu)
    rcw = sesq(c, w)
    db = 2j * (bb * w + b * bw)
    dw = 1j * (w - beta1 * bw * zstar) / mu
    dc = (
        1j * (-bw + beta1 * sesq(w, zstar)) * (-bw * c + beta1 * rcw * zstar) / (bw * mu * mu)
        - 1j * (-rcw + beta1 * bw * sesq(c, zstar)) * (-w + beta1 * bw * zstar) / (bw * mu * mu)
        - 1j * ((-3.0 + 2.0 * bb * rd) * w + 2.0 * b * rd * bw)
    )
    return db, dw, dc


def lie_field_in_hyperboloid(h: HyperboloidState, cset: ControlSetSpec, zstar: complex) -> tuple[complex, complex, complex]:
    """(b', w', c') obtained by pushing the Lie-algebra field through the chart."""
    s = extended_state(h)
    f = reinhardt_field(s, boundary_control(cset, zstar))
    return cayley(f.L1).p / math.sqrt(h.d), cayley(f.X).p, cayley(f.LR).p


def hyperboloid_hamiltonian(h: HyperboloidState, cset: ControlSetSpec, zstar: complex) -> float:
    """The Hamiltonian (lambda = -1) in hyperboloid coordinates."""
    beta1 = cset.beta1
    w, b, c = h.w, h.b, h.c
    rd = math.sqrt(h.d)
    bw = bracket(w)
    mu = star_margin(w, zstar, beta1)
    return (2.0 * rd * sesq(w, b) + (2.0 * rd * bracket(b) - 3.0) * bw
            - (sesq(w, c) - beta1 * bw * sesq(zstar, c)) / (mu * bw))


def hyperboloid_angular_momentum(h: HyperboloidState) -> float:
    """2 sqrt(d) [b] - 2 R(w, c)/[w]; equals 3 on the singular locus."""
    return 2.0 * math.sqrt(h.d) * bracket(h.b) - 2.0 * sesq(h.w, h.c) / bracket(h.w)


def optimal_zstar(h: HyperboloidState, cset: ControlSetSpec = U_C) -> complex:
    X, L1, LR = from_hyperboloid(h)
    return maximize_disk(X, L1, LR, cset).z


# ---------------------------------------------------------------------------
# Truncated system
# ---------------------------------------------------------------------------

def truncated_field(h: HyperboloidState, beta1: float) -> tuple[complex, complex, complex]:
    """(b', w', c') = (2i w, -i beta1 c/|c|, -3i b)."""
    if h.c == 0:
        raise ArithmeticError("c = 0: the truncated control is undefined")
    return 2j * h.w, -1j * beta1 * h.c / abs(h.c), -3j * h.b


def truncated_hamiltonian(h: HyperboloidState, beta1: float) -> float:
    """3 R(w, b) + beta1 |c|, the leading part of the Hamiltonian at d = 9/4."""
    return 3.0 * sesq(h.w, h.b) + beta1 * abs(h.c)


def truncated_angular_momentum(h: HyperboloidState) -> float:
    """(3/2)|b|^2 - 2 R(c, w), the leading part of (angular momentum - 3)."""
    return 1.5 * abs(h.b) ** 2 - 2.0 * sesq(h.c, h.w)


def to_chain(h: HyperboloidState, beta1: float) -> "FullerState":
    return FullerState(np.array([h.w / beta1, -1j * h.b / (2.0 * beta1), h.c / (6.0 * beta1)]), -1j)


def from_chain(f: "FullerState", beta1: float, d: float = SINGULAR_D) -> HyperboloidState:
    z1, z2, z3 = f.z
    return HyperboloidState(complex(beta1 * z1), complex(2j * beta1 * z2), complex(6.0 * beta1 * z3), d)


# ---------------------------------------------------------------------------
# Fuller chains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FullerState:
    """Chain variables (z1, ..., zn) with z_k' = z_{k-1} and z1' = gamma zn/|zn|."""

    z: np.ndarray
    gamma: complex = -1j

    def __post_init__(self):
        z = np.asarray(self.z, dtype=complex)
        object.__setattr__(self, "z", z)
        if z.ndim != 1 or z.shape[0] < 2:
            raise ValueError("a Fuller chain needs n >= 2 complex entries")
        if abs(abs(self.gamma) - 1.0) > 1e-12:
            raise ValueError("|gamma| must be 1")
        if abs((self.gamma / 1j ** self.n).imag) > 1e-12:
            raise ValueError("gamma must lie in i^n R")

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def sign(self) -> float:
        """gamma / i^n, which is +1 or -1."""
        return float((self.gamma / 1j ** self.n).real)


def fuller_field(f: FullerState) -> np.ndarray:
    zn = f.z[-1]
    if zn == 0:
        raise ArithmeticError("z_n = 0: the chain is singular")
    out = np.empty_like(f.z)
    out[0] = f.gamma * zn / abs(zn)
    out[1:] = f.z[:-1]
    return out


def H_c(z) -> float:
    """(i/2)(z2 conj z1 - conj z2 z1) + |z3| for the length-3 chain."""
    z1, z2, z3 = z[0], z[1], z[2]
    return float((0.5j * (z2 * np.conj(z1) - np.conj(z2) * z1)).real + abs(z3))


def A_c(z) -> float:
    """|z2|^2 - (z1 conj z3 + conj z1 z3)."""
    z1, z2, z3 = z[0], z[1], z[2]
    return float(abs(z2) ** 2 - 2.0 * (z1 * np.conj(z3)).real)


def H_n(f: FullerState) -> float:
    """Hamiltonian of the length-n chain for the bracket :func:`poisson_bracket`.

    (1/2) sum_{j=1}^{n-1} (-1)^j R(z_j, i^n z_{n-j}) + (gamma/i^n)|z_n|.
    For n = 3 and gamma = -i this is H_c.
    """
    n = f.n
    z = f.z
    c = 1j ** n
    s = sum((-1) ** j * sesq(z[j - 1], c * z[n - j - 1]) for j in range(1, n))
    return 0.5 * s + f.sign * abs(z[-1])


def A_n(f: FullerState) -> float:
    """sum_{j=1}^{n} (-1)^j R(i^{n+1} z_j, z_{n-j+1}); equals A_c for n = 3."""
    n = f.n
    z = f.z
    c = 1j ** (n + 1)
    return sum((-1) ** j * sesq(c * z[j - 1], z[n - j]) for j in range(1, n + 1))


def wirtinger(F: Callable[[np.ndarray], float], z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(dF/dz_k, dF/dconj(z_k)) by central differences of step 1e-6 (1 + |z_k|)."""
    z = np.asarray(z, dtype=complex)
    dz = np.empty(z.shape, dtype=complex)
    dzb = np.empty(z.shape, dtype=complex)
    for k in range(z.shape[0]):
        h = FD_REL * (1.0 + abs(z[k]))
        e = np.zeros_like(z)
        e[k] = h
        fx = (F(z + e) - F(z - e)) / (2.0 * h)
        fy = (F(z + 1j * e) - F(z - 1j * e)) / (2.0 * h)
        dz[k] = 0.5 * (fx - 1j * fy)
        dzb[k] = 0.5 * (fx + 1j * fy)
    return dz, dzb


def _chain_phase(n: int) -> complex:
    """i^(n-3): the normalisation that makes H_n generate the length-n chain."""
    return 1j ** (n - 3)


def hamiltonian_vector_field(G: Callable, z) -> np.ndarray:
    """z_j' = i^(n-3) 2i (-1)^j dG/dconj(z_{n-j+1}), the flow generated by G.

    For n = 3 this is the usual 2i (-1)^j dG/dconj(z_{4-j}).
    """
    z = np.asarray(z, dtype=complex)
    n = z.shape[0]
    _, gb = wirtinger(G, z)
    k = _chain_phase(n)
    return np.array([k * 2j * (-1) ** j * gb[n - j] for j in range(1, n + 1)])


def poisson_bracket(A: Callable, B: Callable, z) -> float:
    """{A, B} = dA applied to the Hamiltonian vector field of B, for any length n.

    When n = 3 this reduces to (2/i) sum_j (-1)^j (B_{z_{4-j}} A_{zbar_j} - B_{zbar_{4-j}} A_{z_j}),
    written out in :func:`poisson_bracket_c`.
    """
    z = np.asarray(z, dtype=complex)
    a, _ = wirtinger(A, z)
    return float(2.0 * np.real(np.sum(a * hamiltonian_vector_field(B, z))))


def poisson_bracket_c(A: Callable, B: Callable, z) -> float:
    """The length-3 bracket, transcribed pair by pair."""
    a, ab = wirtinger(A, z)
    b, bb = wirtinger(B, z)
    s = (a[0] * bb[2] - ab[2] * b[0]) + (-a[1] * bb[1] + ab[1] * b[1]) + (a[2] * bb[0] - ab[0] * b[2])
    return float((2.0 / 1j * s).real)


def symplectic_form(U: np.ndarray, V: np.ndarray) -> float:
    """omega(U, V) = i^(3-n) sum_j (-1)^j/(2i) (U_j conj V_{n-j+1} - V_j conj U_{n-j+1}).

    With this sign, omega(X_G, Y) = dG(Y) for the field X_G of
    :func:`hamiltonian_vector_field`.
    """
    n = U.shape[0]
    s = 0.0 + 0.0j
    for j in range(1, n + 1):
        s += (-1) ** j * (U[j - 1] * np.conj(V[n - j]) - V[j - 1] * np.conj(U[n - j]))
    return float((np.conj(_chain_phase(n)) * s / 2j).real)


def directional_derivative(F: Callable, z, Y) -> float:
    z = np.asarray(z, dtype=complex)
    h = FD_REL * (1.0 + float(np.max(np.abs(z))))
    return (F(z + h * Y) - F(z - h * Y)) / (2.0 * h)


def scale_chain(z: np.ndarray, theta: float, r: float) -> np.ndarray:
    """(e^{i theta} r^k z_k): maps the state at t to the scaled solution's state at r t."""
    k = np.arange(1, z.shape[0] + 1)
    return np.exp(1j * theta) * r ** k * z


def time_reversal(z: np.ndarray) -> np.ndarray:
    """z_k -> (-1)^k conj z_k; composed with t -> -t this maps solutions to solutions."""
    k = np.arange(1, z.shape[0] + 1)
    return (-1.0) ** k * np.conj(z)


def integrate_fuller(f: FullerState, t: float, step: float = 1e-3, record_every: int = 1,
                     backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """RK4 samples (times, z) of the chain over [0, t] (t may be negative)."""
    n = max(1, int(round(abs(t) / step)))
    h = t / n
    return kernels(backend).rk4_fuller(f.z.astype(np.complex128), complex(f.gamma), h, n, record_every)


# ---------------------------------------------------------------------------
# Log spirals
# ---------------------------------------------------------------------------

SPIRAL_COEFFS = (complex((2 - 1j) * (3 - 1j) / 10.0), complex((3 - 1j) / 10.0), 0.1 + 0j)


def _power(t, p: float):
    """t^{p - i} = t^p e^{-i ln t} for t > 0."""
    t = np.asarray(t, dtype=float)
    return t ** p * np.exp(-1j * np.log(t))


def spiral_state(t: float, direction: str = "outward", T: float = 1.0) -> FullerState:
    """:func:`log_spiral` at a single time, wrapped as a chain state."""
    return FullerState(log_spiral(float(t), direction, T).astype(complex), -1j)


def log_spiral(t, direction: str = "outward", T: float = 1.0) -> np.ndarray:
    """The self-similar solution of the length-3 chain, as (z1, z2, z3).

    Outward: z_k = A_k t^{k - i}.  Inward: z_k(t) = (-1)^k conj(outward_k(T - t)),
    which reaches the origin at t = T.  Accepts scalar or array t.
    """
    t = np.asarray(t, dtype=float)
    if direction == "outward":
        s = t
    elif direction == "inward":
        s = T - t
    else:
        raise ValueError("direction must be 'inward' or 'outward'")
    if np.any(s <= 0.0):
        raise ValueError("the spiral is defined only for positive (time to go)")
    z = np.array([SPIRAL_COEFFS[k] * _power(s, k + 1) for k in range(3)])
    if direction == "inward":
        z = time_reversal_rows(z)
    return z


def time_reversal_rows(z: np.ndarray) -> np.ndarray:
    sign = np.array([-1.0, 1.0, -1.0]).reshape((3,) + (1,) * (z.ndim - 1))
    return sign * np.conj(z)


def log_spiral_derivative(t, direction: str = "outward", T: float = 1.0) -> np.ndarray:
    """Closed-form time derivative of :func:`log_spiral`."""
    t = np.asarray(t, dtype=float)
    s = t if direction == "outward" else T - t
    # d/ds A_k s^{k-i} = A_k (k - i) s^{k-1-i}; the k = 1 term gives -i s^{-i}.
    dz = np.array([
        -1j * _power(s, 0),
        SPIRAL_COEFFS[1] * (2 - 1j) * _power(s, 1),
        SPIRAL_COEFFS[2] * (3 - 1j) * _power(s, 2),
    ])
    if direction == "inward":
        dz = -time_reversal_rows(dz)
    return dz


def control_winding(t0: float, t1: float, n: int = 2000) -> float:
    """Turns made by the outward spiral's control phase z3/|z3| over [t0, t1]."""
    ts = np.geomspace(t0, t1, n)
    ph = np.unwrap(np.angle(log_spiral(ts)[2]))
    return float(abs(ph[-1] - ph[0]) / (2.0 * math.pi))


FULLER_CSV_COLUMNS = ("t", "z1_re", "z1_im", "z2_re", "z2_im", "z3_re", "z3_im", "H_c", "A_c")


def fuller_rows(times: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Rows (t, Re/Im of z1..z3, H_c, A_c) for a sampled length-3 chain."""
    z = np.asarray(z, dtype=complex)
    if z.ndim != 2 or z.shape[1] != 3:
        raise ValueError("expected samples of shape (m, 3)")
    out = np.empty((z.shape[0], 9))
    out[:, 0] = times
    out[:, 1:7:2] = z.real
    out[:, 2:7:2] = z.imag
    out[:, 7] = [H_c(r) for r in z]
    out[:, 8] = [A_c(r) for r in z]
    return out


def fuller_csv(times: np.ndarray, z: np.ndarray, path) -> None:
    np.savetxt(path, fuller_rows(times, z), delimiter=",", header=",".join(FULLER_CSV_COLUMNS),
               comments="", fmt="%.17g")


def spiral_svg(t0: float = 1e-3, t1: float = 1.0, n: int = 800, size: int = 480) -> str:
    """SVG of the three outward-spiral components, each scaled to fit its own panel."""
    ts = np.geomspace(t0, t1, n)
    z = log_spiral(ts)
    panel = size // 3
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{3 * panel}" height="{panel}" '
             f'viewBox="0 0 {3 * panel} {panel}">']
    for k in range(3):
        r = float(np.max(np.abs(z[k]))) or 1.0
        cx = panel * k + panel / 2.0
        cy = panel / 2.0
        s = 0.45 * panel / r
        pts = " ".join(f"{cx + s * v.real:.3f},{cy - s * v.imag:.3f}" for v in z[k])
        parts.append(f'<polyline fill="none" stroke="black" stroke-width="1" points="{pts}"/>')
        parts.append(f'<text x="{cx - 8:.1f}" y="16" font-size="12">z{k + 1}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# Valuations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValuationFit:
    slope: float
    intercept: float
    residual: float


def valuation_fit(t, magnitude) -> ValuationFit:
    """Least-squares slope of log(magnitude) against log(t)."""
    t = np.asarray(t, dtype=float)
    m = np.asarray(magnitude, dtype=float)
    if t.shape[0] < 10:
        raise ValueError("need at least 10 samples")
    if np.any(m <= 0.0) or np.any(t <= 0.0):
        raise ValueError("times and magnitudes must be positive")
    A = np.column_stack([np.log(t), np.ones_like(t)])
    coef, res, *_ = np.linalg.lstsq(A, np.log(m), rcond=None)
    r = float(np.sqrt(res[0] / t.shape[0])) if res.size else 0.0
    return ValuationFit(float(coef[0]), float(coef[1]), r)


@dataclass
class NearSingularRun:
    time_to_go: np.ndarray
    magnitudes: np.ndarray  # columns |w|, |b|, |c|
    fits: tuple[ValuationFit, ValuationFit, ValuationFit]
    exited: bool


def hyperboloid_series(data: np.ndarray) -> np.ndarray:
    """(w, b, c) for each row of a trajectory data array."""
    X = data[:, 4:7]
    L1 = data[:, 7:10]
    LR = data[:, 10:13]

    def p(M):
        return 0.5 * (M[:, 1] + M[:, 2]) + 1j * M[:, 0]

    d = -L1[:, 0] ** 2 - L1[:, 1] * L1[:, 2]
    return np.column_stack([p(X), p(L1) / np.sqrt(d), p(LR)])


def near_singular_run(scale: float = 1e-3, fraction: float = 0.8, cset: ControlSetSpec = U_C,
                      step: float | None = None, backend: str | None = None) -> NearSingularRun:
    """Integrate the full closed-loop system from a point on the inward spiral.

    The chain state of the inward spiral with time to go ``scale`` is pushed
    to hyperboloid coordinates (d = 9/4) and then to the extended state.  The
    full system is integrated for ``fraction * scale`` and the slopes of
    log|w|, log|b|, log|c| against log(time to go) are fitted.  The step
    defaults to scale / 10^4.
    """
    if step is None:
        step = scale * 1e-4
    beta1 = cset.beta1
    z = log_spiral(0.0, "inward", scale)
    h = from_chain(FullerState(z.astype(complex), -1j), beta1)
    s0 = extended_state(h)
    cfg = IntegratorConfig(step=step, renormalize_every=100, record_every=10)
    traj = integrate(s0, ClosedLoopPolicy(cset), fraction * scale, cfg, backend)
    hyp = hyperboloid_series(traj.data)
    mags = np.abs(hyp)
    ttg = scale - traj.times
    keep = (ttg > 0) & np.all(mags > 0, axis=1)
    fits = tuple(valuation_fit(ttg[keep], mags[keep, k]) for k in range(3))
    return NearSingularRun(ttg[keep], mags[keep], fits, traj.exited)


def spiral_hyperboloid(eps: float, beta1: float, t: float = 1.0) -> HyperboloidState:
    """The outward spiral at time t, scaled by eps and mapped to (w, b, c)."""
    z = scale_chain(log_spiral(t).astype(complex), 0.0, eps)
    return from_chain(FullerState(z, -1j), beta1)


def truncation_ratios(eps: float, cset: ControlSetSpec = U_C) -> tuple[float, float, float]:
    """|full - truncated| / eps^k for (c, b, w) with k = (2, 1, 0)."""
    beta1 = cset.beta1
    h = spiral_hyperboloid(eps, beta1)
    zs = optimal_zstar(h, cset)
    db, dw, dc = hyperboloid_field(h, cset, zs)
    tb, tw, tc = truncated_field(h, beta1)
    return abs(dc - tc) / eps ** 2, abs(db - tb) / eps, abs(dw - tw)

