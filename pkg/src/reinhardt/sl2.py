"""Closed-form linear algebra on sl2(R), SL2(R) and su(1,1).

Every element of sl2(R) is stored as the triple (a, b, c) standing for the
matrix [[a, b], [c, -a]].  All operations are explicit 2x2 formulas, so they
are exact up to floating point rounding and cheap enough to call inside
integrator loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SERIES_THRESHOLD = 1e-12


@dataclass(frozen=True, slots=True)
class Traceless:
    """An element [[a, b], [c, -a]] of sl2(R)."""

    a: float
    b: float
    c: float

    @property
    def det(self) -> float:
        return -self.a * self.a - self.b * self.c

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, -self.a]], dtype=float)

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c], dtype=float)

    @classmethod
    def from_array(cls, v) -> "Traceless":
        return cls(float(v[0]), float(v[1]), float(v[2]))

    @classmethod
    def from_matrix(cls, m) -> "Traceless":
        """Project a 2x2 matrix onto its traceless part."""
        m = np.asarray(m, dtype=float)
        half = 0.5 * (m[0, 0] - m[1, 1])
        return cls(float(half), float(m[0, 1]), float(m[1, 0]))

    def norm2(self) -> float:
        """Squared Frobenius norm."""
        return 2.0 * self.a * self.a + self.b * self.b + self.c * self.c

    def __add__(self, other: "Traceless") -> "Traceless":
        return Traceless(self.a + other.a, self.b + other.b, self.c + other.c)

    def __sub__(self, other: "Traceless") -> "Traceless":
        return Traceless(self.a - other.a, self.b - other.b, self.c - other.c)

    def __neg__(self) -> "Traceless":
        return Traceless(-self.a, -self.b, -self.c)

    def __mul__(self, s: float) -> "Traceless":
        return Traceless(s * self.a, s * self.b, s * self.c)

    __rmul__ = __mul__

    def __truediv__(self, s: float) -> "Traceless":
        return Traceless(self.a / s, self.b / s, self.c / s)


@dataclass(frozen=True, slots=True)
class GroupMatrix:
    """An element [[m11, m12], [m21, m22]] of SL2(R)."""

    m11: float
    m12: float
    m21: float
    m22: float

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21

    def matrix(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]], dtype=float)

    def as_array(self) -> np.ndarray:
        return np.array([self.m11, self.m12, self.m21, self.m22], dtype=float)

    @classmethod
    def from_array(cls, v) -> "GroupMatrix":
        v = np.asarray(v, dtype=float).ravel()
        return cls(float(v[0]), float(v[1]), float(v[2]), float(v[3]))

    @classmethod
    def identity(cls) -> "GroupMatrix":
        return cls(1.0, 0.0, 0.0, 1.0)

    def inverse(self) -> "GroupMatrix":
        d = self.det
        return GroupMatrix(self.m22 / d, -self.m12 / d, -self.m21 / d, self.m11 / d)

    def __matmul__(self, other: "GroupMatrix") -> "GroupMatrix":
        return GroupMatrix(
            self.m11 * other.m11 + self.m12 * other.m21,
            self.m11 * other.m12 + self.m12 * other.m22,
            self.m21 * other.m11 + self.m22 * other.m21,
            self.m21 * other.m12 + self.m22 * other.m22,
        )

    def adjoint(self, A: Traceless) -> Traceless:
        """Return g A g^{-1}."""
        return Traceless.from_matrix(self.matrix() @ A.matrix() @ self.inverse().matrix())

    def apply(self, v) -> np.ndarray:
        x, y = v
        return np.array([self.m11 * x + self.m12 * y, self.m21 * x + self.m22 * y])

    def renormalized(self) -> "GroupMatrix":
        s = 1.0 / math.sqrt(self.det)
        return GroupMatrix(self.m11 * s, self.m12 * s, self.m21 * s, self.m22 * s)

    def distance(self, other: "GroupMatrix") -> float:
        return float(np.max(np.abs(self.as_array() - other.as_array())))


@dataclass(frozen=True, slots=True)
class Su11:
    """The su(1,1) matrix [[-i delta, p], [conj(p), i delta]]."""

    delta: float
    p: complex

    def matrix(self) -> np.ndarray:
        return np.array(
            [[-1j * self.delta, self.p], [self.p.conjugate(), 1j * self.delta]],
            dtype=complex,
        )

    @property
    def det(self) -> float:
        return self.delta * self.delta - abs(self.p) ** 2


def trace_form(A: Traceless, B: Traceless) -> float:
    """tr(AB), the invariant symmetric form on sl2(R)."""
    return 2.0 * A.a * B.a + A.b * B.c + A.c * B.b


def commutator(A: Traceless, B: Traceless) -> Traceless:
    """AB - BA."""
    return Traceless(
        A.b * B.c - A.c * B.b,
        2.0 * (A.a * B.b - A.b * B.a),
        2.0 * (A.c * B.a - A.a * B.c),
    )


def exp_traceless(X: Traceless, t: float = 1.0) -> GroupMatrix:
    """exp(tX) via the Cayley-Hamilton identity X^2 = -det(X) I.

    The hyperbolic, trigonometric and nilpotent regimes are all covered.  When
    det X is tiny relative to the size of X, a short Taylor series replaces
    sinh(s)/s to avoid cancellation.
    """
    r = X.det
    scale = X.norm2()
    if abs(r) < SERIES_THRESHOLD * scale or scale == 0.0:
        s = -r * t * t
        c0 = 1.0 + s / 2.0 + s * s / 24.0
        c1 = t * (1.0 + s / 6.0 + s * s / 120.0)
    elif r < 0.0:
        k = math.sqrt(-r)
        c0 = math.cosh(k * t)
        c1 = math.sinh(k * t) / k
    else:
        k = math.sqrt(r)
        c0 = math.cos(k * t)
        c1 = math.sin(k * t) / k
    return GroupMatrix(c0 + c1 * X.a, c1 * X.b, c1 * X.c, c0 - c1 * X.a)


def cayley(A: Traceless) -> Su11:
    """Conjugate by the Cayley transform C = (1/sqrt2)[[1, i], [i, 1]], giving C^{-1} A C."""
    return Su11(0.5 * (A.c - A.b), complex(0.5 * (A.b + A.c), A.a))


def cayley_inverse(S: Su11) -> Traceless:
    """Inverse of :func:`cayley`."""
    return Traceless(S.p.imag, S.p.real - S.delta, S.p.real + S.delta)


def su11_trace_form(S: Su11, T: Su11) -> float:
    """tr(ST) computed directly in su(1,1) coordinates."""
    return -2.0 * S.delta * T.delta + 2.0 * (S.p * T.p.conjugate()).real


def so21(A: Traceless) -> np.ndarray:
    """The 3x3 image of A under the isomorphism sl2(R) -> so(2,1)."""
    a, b, c = A.a, A.b, A.c
    return np.array(
        [[0.0, b - c, b + c], [c - b, 0.0, -2.0 * a], [b + c, -2.0 * a, 0.0]]
    )


def product(A: Traceless, B: Traceless) -> np.ndarray:
    """The plain matrix product AB (not traceless in general)."""
    return A.matrix() @ B.matrix()


J = Traceless(0.0, -1.0, 1.0)
H_DIAG = Traceless(1.0, 0.0, 0.0)
ZERO = Traceless(0.0, 0.0, 0.0)
ROTATION_ANGLE = math.pi / 3.0
R = GroupMatrix(
    math.cos(ROTATION_ANGLE),
    -math.sin(ROTATION_ANGLE),
    math.sin(ROTATION_ANGLE),
    math.cos(ROTATION_ANGLE),
)


def sixth_root(k: int) -> np.ndarray:
    """The planar point (cos k pi/3, sin k pi/3)."""
    ang = k * math.pi / 3.0
    return np.array([math.cos(ang), math.sin(ang)])


def wedge(u, v) -> float:
    return float(u[0] * v[1] - u[1] * v[0])
