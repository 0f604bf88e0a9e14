"""Upper half-plane picture of the adjoint orbit of J.

A point z = x + iy with y > 0 corresponds to the matrix
X_z = [[x/y, -(x^2+y^2)/y], [1/y, -x/y]], which has determinant one.  This
module moves tangent and cotangent vectors between the two pictures,
decides membership in the star domain (the ideal triangle where admissible
X live) and builds the critical hexagon attached to a point together with
the area bound used to confine optimal trajectories to a compact set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .sl2 import Traceless, sixth_root, trace_form

SQRT3 = math.sqrt(3.0)
LINE_DET_TOL = 1e-10


class DomainError(ValueError):
    """Raised when a point lies outside the domain of an operation."""


@dataclass(frozen=True, slots=True)
class HalfPlanePoint:
    x: float
    y: float

    def __post_init__(self):
        if not self.y > 0.0:
            raise DomainError(f"half-plane point needs y > 0, got y={self.y}")

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    @classmethod
    def from_complex(cls, z: complex) -> "HalfPlanePoint":
        return cls(z.real, z.imag)


@dataclass(frozen=True, slots=True)
class Covector:
    nu1: float
    nu2: float


@dataclass(frozen=True)
class HexagonFrame:
    """Critical hexagon of a star-domain point.

    ``P`` holds P0, P1, P2; the opposite vertices are their negatives.  The
    closed-form triangle areas are in ``T`` and ``A``; the areas measured
    from the line intersections are in ``T_geom`` and ``A_geom``.
    """

    P: np.ndarray
    Q: np.ndarray
    T: tuple[float, float, float]
    A: tuple[float, float, float]
    T_geom: tuple[float, float, float]
    A_geom: tuple[float, float, float]

    @property
    def vertices(self) -> np.ndarray:
        return np.vstack([self.P, -self.P])


def _as_point(z) -> HalfPlanePoint:
    if isinstance(z, HalfPlanePoint):
        return z
    if isinstance(z, complex):
        return HalfPlanePoint.from_complex(z)
    x, y = z
    return HalfPlanePoint(float(x), float(y))


def phi(z) -> Traceless:
    """The matrix X_z of the point z."""
    p = _as_point(z)
    x, y = p.x, p.y
    return Traceless(x / y, -(x * x + y * y) / y, 1.0 / y)


def phi_inv(X: Traceless) -> HalfPlanePoint:
    """Inverse of :func:`phi` on positive-determinant X with c > 0."""
    d = X.det
    if d <= 0.0 or X.c <= 0.0:
        raise DomainError(f"matrix is not on the orbit of J (det={d}, c={X.c})")
    return HalfPlanePoint(X.a / X.c, math.sqrt(d) / X.c)


def tangent_push(z, v) -> Traceless:
    """Coset representative of the image of the tangent vector v at z."""
    p = _as_point(z)
    k1, k2 = v
    return Traceless(k2 / (2.0 * p.y), (p.y * k1 - k2 * p.x) / p.y, 0.0)


def tangent_pull(z, W: Traceless) -> tuple[float, float]:
    """Tangent vector at z represented by W, modulo the centralizer of X_z."""
    p = _as_point(z)
    x, y = p.x, p.y
    a, b, c = W.a, W.b, W.c
    return (b + 2.0 * a * x - c * x * x + c * y * y, 2.0 * y * (a - c * x))


def velocity(z, Z: Traceless) -> tuple[float, float]:
    """Half-plane velocity (f1, f2) of X' = [Z/<Z,X>, X] at z."""
    p = _as_point(z)
    x, y = p.x, p.y
    a, b, c = Z.a, Z.b, Z.c
    den = 2.0 * a * x + b - c * x * x - c * y * y
    return (
        y * (2.0 * a * x + b - c * x * x + c * y * y) / den,
        2.0 * y * y * (a - c * x) / den,
    )


def covector(z, LR: Traceless) -> Covector:
    """nu = T*Phi(-LR): the pairing nu(v) = -<LR, push(v)>."""
    e1 = tangent_push(z, (1.0, 0.0))
    e2 = tangent_push(z, (0.0, 1.0))
    return Covector(-trace_form(LR, e1), -trace_form(LR, e2))


def kirillov_form(z, v, w) -> float:
    """Kirillov pairing <X_z, [push v, push w]> of two tangent vectors at z."""
    from .sl2 import commutator

    return trace_form(phi(z), commutator(tangent_push(z, v), tangent_push(z, w)))


def star_membership(z) -> tuple[bool, tuple[float, float, float]]:
    """Whether z is in the star domain, plus signed margins of its three sides.

    The margins are the distances to the lines x = 1/sqrt3, x = -1/sqrt3 and
    to the circle |z| = 1/sqrt3, positive on the inside.
    """
    p = _as_point(z)
    m = (1.0 / SQRT3 - p.x, p.x + 1.0 / SQRT3, math.hypot(p.x, p.y) - 1.0 / SQRT3)
    return all(v > 0.0 for v in m), m


def star_conditions(X: Traceless) -> bool:
    """sqrt3 |a| < c and 3b + c < 0."""
    return SQRT3 * abs(X.a) < X.c and 3.0 * X.b + X.c < 0.0


def _line_intersection(p, d, q, e) -> np.ndarray:
    """Intersection of p + s d and q + t e."""
    det = d[0] * (-e[1]) - d[1] * (-e[0])
    if abs(det) < LINE_DET_TOL:
        raise DomainError("tangent lines are (nearly) parallel")
    rhs = q - p
    s = (rhs[0] * (-e[1]) - rhs[1] * (-e[0])) / det
    return p + s * d


def _tri_area(p, q, r) -> float:
    return 0.5 * abs((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))


def triangle_areas(z) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
    """Closed-form areas (T0, T1, T2), (A0, A1, A2) at z."""
    p = _as_point(z)
    x, y = p.x, p.y
    al = (1.0 + SQRT3 * x) / y
    be = (1.0 - SQRT3 * x) / y
    ga = (3.0 * x * x + 3.0 * y * y - 1.0) / (2.0 * y)
    s = 4.0 * SQRT3
    return (al * ga / s, al * be / s, be * ga / s), (al * al / SQRT3, be * be / SQRT3, ga * ga / SQRT3)


def hexagon_from_point(z) -> HexagonFrame:
    """Critical hexagon whose sides touch the tangent lines at the sixth roots of unity."""
    p = _as_point(z)
    inside, _ = star_membership(p)
    if not inside:
        raise DomainError(f"{p} is outside the star domain")
    Xm = phi(p).matrix()
    E = [sixth_root(k) for k in range(4)]
    D = [Xm @ e for e in E]
    P0 = _line_intersection(E[0], D[0], E[1], D[1])
    P1 = _line_intersection(E[1], D[1], E[2], D[2])
    P2 = _line_intersection(E[2], D[2], E[3], D[3])

    def meet(a, b, c, d):
        return _line_intersection(a, b - a, c, d - c)

    # Cap triangles over the hexagon edges P0P1, P1P2, P2P0'.
    Q0 = meet(-P2, P0, P1, P2)
    Q1 = meet(-P0, P2, P0, P1)
    Q2 = meet(P1, P2, -P0, -P1)
    T_geom = (_tri_area(E[0], P0, E[1]), _tri_area(E[1], P1, E[2]), _tri_area(E[2], P2, E[3]))
    A_geom = (_tri_area(P0, Q0, P1), _tri_area(P1, Q1, P2), _tri_area(P2, Q2, -P0))
    T, A = triangle_areas(p)
    return HexagonFrame(
        P=np.vstack([P0, P1, P2]),
        Q=np.vstack([Q0, Q1, Q2]),
        T=T,
        A=A,
        T_geom=T_geom,
        A_geom=A_geom,
    )


def region_polynomials(z) -> tuple[float, float, float]:
    """Values of the polynomials whose non-negativity defines h0, h1, h2."""
    p = _as_point(z)
    from ._kernels import _region_polys

    return tuple(float(v) for v in _region_polys(p.x, p.y))


def exclusion_bound(z) -> tuple[float, tuple[bool, bool, bool]]:
    """Upper bound E(z) on the density of any disc whose X passes through z.

    E = 3/4 + sum_i 1_{h_i} (T_i - sqrt(A_{i+1} T_i)) / sqrt3, clamped to [0, 1].
    """
    p = _as_point(z)
    inside, _ = star_membership(p)
    if not inside:
        raise DomainError(f"{p} is outside the star domain")
    row = kernels().geometry_sweep(np.array([p.x]), np.array([p.y]))[0]
    return float(row[9]), (bool(row[6]), bool(row[7]), bool(row[8]))


def geometry_sweep(xs, ys) -> np.ndarray:
    """Vectorised areas/regions/bound over many points.

    Columns: T0 T1 T2 A0 A1 A2 in_h0 in_h1 in_h2 E.
    """
    return kernels().geometry_sweep(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))


def sample_star_domain(n: int, rng: np.random.Generator, y_max: float = 10.0) -> tuple[np.ndarray, np.ndarray]:
    """Uniform samples from the star domain truncated at y < y_max (rejection)."""
    xs = np.empty(0)
    ys = np.empty(0)
    while xs.size < n:
        m = 2 * (n - xs.size) + 16
        x = rng.uniform(-1.0 / SQRT3, 1.0 / SQRT3, m)
        y = rng.uniform(0.0, y_max, m)
        keep = (x * x + y * y > 1.0 / 3.0) & (y > 0.0)
        xs = np.concatenate([xs, x[keep]])
        ys = np.concatenate([ys, y[keep]])
    return xs[:n], ys[:n]
