"""Control sets, the control matrix Z_u, and maximisation of the Hamiltonian.

Controls live in the plane u0 + u1 + u2 = 1.  The simplex U_T and the disks
U_r (all u with |u| <= r in that plane) are supported.  The map u -> Z_u is
affine, and in su(1,1) coordinates the boundary of U_r becomes
[[-i alpha, beta z], [beta conj(z), i alpha]] with |z| = 1.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .sl2 import (
    J,
    Su11,
    Traceless,
    cayley,
    cayley_inverse,
    commutator,
    sixth_root,
    trace_form,
    wedge,
)

SQRT3 = math.sqrt(3.0)
ZETA = cmath.exp(2j * math.pi / 3.0)
TIE_RTOL = 1e-9
STAR_EPS = 1e-14
UNIT_TOL = 1e-9


class StarViolation(ArithmeticError):
    """<X, Z_u> vanished or changed sign: the state left the star domain."""

    def __init__(self, xz: float):
        super().__init__(f"star condition violated, <X, Z_u> = {xz:.3e}")
        self.xz = xz


@dataclass(frozen=True, slots=True)
class ControlPoint:
    u0: float
    u1: float
    u2: float

    def __post_init__(self):
        s = self.u0 + self.u1 + self.u2
        if abs(s - 1.0) > 1e-12:
            raise ValueError(f"controls must sum to 1, got {s}")

    def as_array(self) -> np.ndarray:
        return np.array([self.u0, self.u1, self.u2])

    @property
    def radius2(self) -> float:
        return self.u0 ** 2 + self.u1 ** 2 + self.u2 ** 2


VERTICES = (ControlPoint(1.0, 0.0, 0.0), ControlPoint(0.0, 1.0, 0.0), ControlPoint(0.0, 0.0, 1.0))
CENTER = ControlPoint(1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0)


class ControlKind(str, Enum):
    SIMPLEX = "simplex"
    DISK = "disk"


@dataclass(frozen=True, slots=True)
class ControlSetSpec:
    kind: ControlKind
    r2: float = 0.0
    alpha: float = 1.0 / 3.0
    beta: float = 0.0

    @classmethod
    def simplex(cls) -> "ControlSetSpec":
        return cls(ControlKind.SIMPLEX)

    @classmethod
    def disk(cls, r2: float) -> "ControlSetSpec":
        """The disk of squared radius r2 >= 1/3 around the simplex centre."""
        if r2 < 1.0 / 3.0 - 1e-15:
            raise ValueError("disk radius^2 must be at least 1/3")
        return cls(ControlKind.DISK, r2, 1.0 / 3.0, disk_beta(r2))

    @property
    def beta1(self) -> float:
        return self.beta / self.alpha


def disk_beta(r2: float) -> float:
    """beta(r) = (2/3) sqrt((3 r^2 - 1) / 2)."""
    return (2.0 / 3.0) * math.sqrt(max(3.0 * r2 - 1.0, 0.0) / 2.0)


U_C = ControlSetSpec.disk(1.0)
U_I = ControlSetSpec.disk(0.5)


@dataclass(frozen=True)
class OptimalControl:
    point: ControlPoint
    Z: Traceless
    value: float
    singular: bool
    vertex: int | None = None
    z: complex | None = None


def control_matrix(u: ControlPoint) -> Traceless:
    """Z_u, chosen so that u_j = e*_{2j} wedge Z_u e*_{2j}."""
    u0, u1, u2 = u.u0, u.u1, u.u2
    return Traceless((u1 - u2) / SQRT3, (u0 - 2.0 * u1 - 2.0 * u2) / 3.0, u0)


def control_wedges(Z: Traceless) -> tuple[float, float, float]:
    """(e*_{2j} wedge Z e*_{2j}) for j = 0, 1, 2; inverts :func:`control_matrix`."""
    m = Z.matrix()
    out = []
    for j in range(3):
        e = sixth_root(2 * j)
        out.append(wedge(e, m @ e))
    return tuple(out)


def control_point_of(Z: Traceless) -> ControlPoint:
    w = control_wedges(Z)
    return ControlPoint(w[0], w[1], 1.0 - w[0] - w[1])


def control_matrix_su11(cset: ControlSetSpec, z: complex) -> Su11:
    """Boundary control of a disk in su(1,1) form."""
    if abs(abs(z) - 1.0) > 1e-12:
        raise ValueError(f"|z| must be 1, got {abs(z)}")
    return Su11(cset.alpha, cset.beta * z)


def boundary_control(cset: ControlSetSpec, z: complex) -> Traceless:
    return cayley_inverse(control_matrix_su11(cset, z))


def control_point_from_su11(S: Su11) -> ControlPoint:
    """Invert Z = (1/3)[[-i, 2L], [2 conj L, i]] with L = u0 + zeta u1 + zeta^2 u2."""
    L = 1.5 * S.p
    u = [(1.0 + 2.0 * (L * ZETA ** (-k)).real) / 3.0 for k in range(2)]
    return ControlPoint(u[0], u[1], 1.0 - u[0] - u[1])


def hamiltonian(X: Traceless, L1: Traceless, LR: Traceless, Z: Traceless, lambda_cost: float = -1.0) -> float:
    """<L1 - (3/2) lambda J, X> - <LR, Z> / <X, Z>."""
    xz = trace_form(X, Z)
    if abs(xz) < STAR_EPS:
        raise StarViolation(xz)
    return trace_form(L1 - 1.5 * lambda_cost * J, X) - trace_form(LR, Z) / xz


def maximize_simplex(X: Traceless, L1: Traceless, LR: Traceless, lambda_cost: float = -1.0) -> OptimalControl:
    """Best vertex of the simplex.  Ties within TIE_RTOL are flagged singular."""
    vals = [hamiltonian(X, L1, LR, control_matrix(v), lambda_cost) for v in VERTICES]
    order = sorted(range(3), key=lambda k: -vals[k])
    top, second = vals[order[0]], vals[order[1]]
    scale = max(abs(top), abs(second), 1e-300)
    tie = abs(top - second) <= TIE_RTOL * scale
    degenerate = LR.norm2() <= 1e-24 * max(1.0, L1.norm2())
    k = order[0]
    return OptimalControl(
        point=VERTICES[k],
        Z=control_matrix(VERTICES[k]),
        value=top,
        singular=bool(tie or degenerate),
        vertex=k,
    )


def augmented_determinant(M: Su11, alpha: float, beta: float) -> float:
    """D = beta^2 M11^2 + alpha^2 M21 M12 for M = [[-i delta, p], [conj p, i delta]]."""
    m11 = -1j * M.delta
    return float((beta * beta * m11 * m11 + alpha * alpha * M.p.conjugate() * M.p).real)


def quadratic_roots(X: Traceless, LR: Traceless, cset: ControlSetSpec) -> tuple[complex, complex]:
    """Roots of alpha M21 z^2 - 2 i beta M11 z + alpha M12 = 0 for M = C^{-1}[LR, X]C.

    Returns (root with +sqrt(D), root with -sqrt(D)).
    """
    M = cayley(commutator(LR, X))
    m11 = -1j * M.delta
    m21 = M.p.conjugate()
    D = augmented_determinant(M, cset.alpha, cset.beta)
    sq = cmath.sqrt(D)
    return (
        1j * (cset.beta * m11 + sq) / (cset.alpha * m21),
        1j * (cset.beta * m11 - sq) / (cset.alpha * m21),
    )


def noether_residual(X: Traceless, LR: Traceless, cset: ControlSetSpec, z: complex) -> float:
    """<Z*, [LR, X]> - ((alpha^2 - beta^2)/alpha) <J, [LR, X]>."""
    M = commutator(LR, X)
    Zs = boundary_control(cset, z / abs(z))
    a, b = cset.alpha, cset.beta
    return trace_form(Zs, M) - (a * a - b * b) / a * trace_form(J, M)


def maximize_disk(X: Traceless, L1: Traceless, LR: Traceless, cset: ControlSetSpec, lambda_cost: float = -1.0) -> OptimalControl:
    """Maximising boundary control on the disk ``cset``.

    Both roots of the quadratic are computed and the one with the larger
    Hamiltonian is returned.  Under the Cayley convention used here that is
    the root with -sqrt(D).  The returned root is checked to lie on the unit
    circle and to satisfy the angular-momentum constraint.
    """
    if cset.kind is not ControlKind.DISK:
        raise ValueError("maximize_disk needs a disk control set")
    M = commutator(LR, X)
    scale = max(1.0, X.norm2(), LR.norm2())
    if M.norm2() <= 1e-26 * scale * scale:
        Z = boundary_control(cset, 1.0)
        return OptimalControl(control_point_of(Z), Z, hamiltonian(X, L1, LR, Z, lambda_cost), True, z=1.0 + 0j)
    Msu = cayley(M)
    if cset.beta == 0.0 or abs(Msu.p) <= 1e-13 * (abs(Msu.p) + abs(Msu.delta)):
        theta = _sweep_argmax(X, L1, LR, cset, lambda_cost)
        z = cmath.exp(1j * theta)
    else:
        cands = quadratic_roots(X, LR, cset)
        vals = [hamiltonian(X, L1, LR, boundary_control(cset, c / abs(c)), lambda_cost) for c in cands]
        z = cands[int(np.argmax(vals))]
        if abs(abs(z) - 1.0) > UNIT_TOL:
            raise ArithmeticError(f"quadratic root is off the unit circle: |z| = {abs(z)}")
        res = noether_residual(X, LR, cset, z)
        if abs(res) > 1e-8 * max(1.0, math.sqrt(M.norm2())):
            raise ArithmeticError(f"angular momentum constraint fails at the root: {res:.3e}")
        z = z / abs(z)
    Z = boundary_control(cset, z)
    return OptimalControl(control_point_of(Z), Z, hamiltonian(X, L1, LR, Z, lambda_cost), False, z=z)


def _sweep_argmax(X, L1, LR, cset, lambda_cost, n=720) -> float:
    """Argmax over a uniform boundary grid, for degenerate quadratics."""
    s = np.zeros(14)
    s[4:7] = X.as_array()
    s[7:10] = L1.as_array()
    s[10:13] = LR.as_array()
    best, best_t = -math.inf, 0.0
    for k in range(n):
        t = 2.0 * math.pi * k / n
        qa, qr = cset.beta * math.sin(t), cset.beta * math.cos(t)
        v = _kernels.control_hamiltonian(s, qa, qr - cset.alpha, qr + cset.alpha, lambda_cost)
        if v > best:
            best, best_t = v, t
    return best_t


def boundary_sweep(X: Traceless, L1: Traceless, LR: Traceless, cset: ControlSetSpec, n: int, lambda_cost: float = -1.0) -> tuple[np.ndarray, np.ndarray]:
    """Hamiltonian at n equally spaced boundary angles (an oracle for tests)."""
    theta = 2.0 * np.pi * np.arange(n) / n
    zq = cset.beta * np.exp(1j * theta)
    za, zb, zc = zq.imag, zq.real - cset.alpha, zq.real + cset.alpha
    x = X.as_array()
    l = (L1 - 1.5 * lambda_cost * J).as_array()
    r = LR.as_array()

    def tf(u, a, b, c):
        return 2.0 * u[0] * a + u[1] * c + u[2] * b

    first = 2.0 * l[0] * x[0] + l[1] * x[2] + l[2] * x[1]
    return theta, first - tf(r, za, zb, zc) / tf(x, za, zb, zc)


def state_curvatures(X: Traceless, Xdot: Traceless) -> tuple[float, float, float]:
    """v_j = e*_{2j} wedge (X + X^{-1} X') e*_{2j} for j = 0, 1, 2.

    Along the flow with control u these equal v(X) u_j, v(X) > 0.
    """
    Xm = X.matrix()
    M = Xm + np.linalg.solve(Xm, Xdot.matrix())
    out = []
    for j in range(3):
        e = sixth_root(2 * j)
        out.append(wedge(e, M @ e))
    return tuple(out)
