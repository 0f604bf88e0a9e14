"""Random test data: admissible states, controls and abnormal initial conditions.

All helpers take an explicit ``numpy.random.Generator`` so every caller
(tests, the ``check`` command, benchmarks) is reproducible from a seed.
"""

from __future__ import annotations

import numpy as np

from .controls import ControlPoint
from .dynamics import ExtendedState
from .halfplane import phi
from .sl2 import GroupMatrix, Traceless, trace_form


def random_traceless(rng: np.random.Generator, scale: float = 1.0) -> Traceless:
    return Traceless.from_array(scale * rng.normal(size=3))


def project_perp(A: Traceless, X: Traceless) -> Traceless:
    """Remove the X-component of A in the trace form (needs <X, X> != 0)."""
    return A - X * (trace_form(A, X) / trace_form(X, X))


def random_near_i(rng: np.random.Generator, spread: float = 0.1) -> Traceless:
    """X = phi(z) for z uniform in a box of half-width ``spread`` around i.

    Points this close to i satisfy the star condition for the simplex and
    for every disk control set up to the circumscribed one.
    """
    x = rng.uniform(-spread, spread)
    y = rng.uniform(1.0 - spread, 1.0 + spread)
    return phi((x, y))


def random_control_point(rng: np.random.Generator) -> ControlPoint:
    """A uniform sample from the simplex u0 + u1 + u2 = 1, u >= 0."""
    u = rng.dirichlet(np.ones(3))
    return ControlPoint(float(u[0]), float(u[1]), float(1.0 - u[0] - u[1]))


def random_admissible_state(rng: np.random.Generator, spread: float = 0.1, costate_scale: float = 1.0) -> ExtendedState:
    """An extended state with X near i, LR orthogonal to X and lambda = -1."""
    X = random_near_i(rng, spread)
    L1 = random_traceless(rng, costate_scale)
    LR = project_perp(random_traceless(rng, costate_scale), X)
    return ExtendedState(GroupMatrix.identity(), X, L1, LR, -1.0)


def random_abnormal(rng: np.random.Generator) -> tuple[Traceless, Traceless, Traceless]:
    """(X0, LR0, K) with <LR0, X0> = 0 and <K, X0> = -w/2, so 2u + w = 0 holds.

    The trace form is positive definite on the orthogonal complement of X0,
    so <LR0, LR0> > 0 and w is well defined.
    """
    X0 = random_near_i(rng, 0.2)
    while True:
        LR0 = project_perp(random_traceless(rng), X0)
        rr = trace_form(LR0, LR0)
        if rr > 0.05:
            break
    w = np.sqrt(2.0 * rr)
    K = random_traceless(rng)
    # <X0, X0> = -2, so adding s X0 shifts <K, X0> by -2 s.
    K = K + X0 * ((trace_form(K, X0) + 0.5 * w) / 2.0)
    return X0, LR0, K


def random_near_singular(rng: np.random.Generator, scale: float = 0.1, d: float | None = None) -> ExtendedState:
    """A state a distance ~scale from the singular locus, built in hyperboloid coordinates.

    LR is orthogonal to X by construction.  ``d`` (= det L1) defaults to a
    uniform draw from [1.5, 3].
    """
    from .fuller import HyperboloidState, extended_state

    w, b, c = scale * (rng.normal(size=3) + 1j * rng.normal(size=3))
    dd = float(rng.uniform(1.5, 3.0)) if d is None else d
    return extended_state(HyperboloidState(complex(w), complex(b), complex(c), dd))


def random_persistent_state(rng: np.random.Generator, cset, t_end: float = 1.0, scale: float = 0.1,
                            step: float = 1e-3, max_tries: int = 500) -> ExtendedState:
    """A near-singular state whose closed-loop flow over ``cset`` stays admissible on [0, t_end].

    Closed-loop flows over the circumscribed disk leave the star domain
    quickly from most starting points, so candidates are screened with a
    coarse RK4 run and rejected if they exit.
    """
    from .dynamics import ClosedLoopPolicy, IntegratorConfig, integrate

    cfg = IntegratorConfig(step=step, record_every=10_000)
    policy = ClosedLoopPolicy(cset)
    for _ in range(max_tries):
        s0 = random_near_singular(rng, scale)
        if not integrate(s0, policy, 1.05 * t_end, cfg).exited:
            return s0
    raise RuntimeError(f"no state stayed admissible for t <= {t_end} in {max_tries} tries")
