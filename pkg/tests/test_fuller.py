"""Hyperboloid chart, truncated chain system, log spirals and valuation fits."""

import cmath
import math

import numpy as np
import pytest

from reinhardt.controls import U_C, U_I, StarViolation, hamiltonian, maximize_disk
from reinhardt.dynamics import ClosedLoopPolicy, ExtendedState, IntegratorConfig, angular_momentum, integrate
from reinhardt.fuller import (
    FULLER_CSV_COLUMNS,
    SINGULAR_D,
    A_c,
    A_n,
    BranchError,
    FullerState,
    H_c,
    H_n,
    HyperboloidState,
    bracket,
    control_winding,
    directional_derivative,
    extended_state,
    from_chain,
    from_hyperboloid,
    fuller_csv,
    fuller_field,
    fuller_rows,
    hamiltonian_vector_field,
    hyperboloid_angular_momentum,
    hyperboloid_field,
    hyperboloid_hamiltonian,
    hyperboloid_series,
    integrate_fuller,
    lie_field_in_hyperboloid,
    log_spiral,
    log_spiral_derivative,
    near_singular_run,
    optimal_zstar,
    poisson_bracket,
    poisson_bracket_c,
    scale_chain,
    sesq,
    spiral_state,
    spiral_svg,
    star_margin,
    symplectic_form,
    time_reversal,
    to_chain,
    to_hyperboloid,
    truncated_angular_momentum,
    truncated_field,
    truncated_hamiltonian,
    truncation_ratios,
    valuation_fit,
)
from reinhardt.sampling import random_near_singular, random_persistent_state
from reinhardt.sl2 import J, Traceless

ROUND_TRIP_TOL = 1e-10
FIELD_TOL = 1e-8
SPIRAL_TOL = 1e-12
DRIFT_PER_UNIT_TIME = 1e-9
BRACKET_TOL = 1e-6
SLOPE_TOL = 1e-9
EXPLORATORY_SLOPE_TOL = 0.2
SPIRAL_TIMES = np.geomspace(0.05, 2.0, 100)


def random_chain(rng, n=3):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


def chain_gamma(rng, n):
    return (1j ** n) * rng.choice([-1.0, 1.0])


def random_hyperboloid(rng, scale=0.3, d=None):
    w, b, c = scale * random_chain(rng)
    return HyperboloidState(complex(w), complex(b), complex(c), float(rng.uniform(1.0, 3.0)) if d is None else d)


def admissible_angle(rng, h, beta1):
    while True:
        z = cmath.exp(1j * rng.uniform(0, 2 * math.pi))
        if star_margin(h.w, z, beta1) > 0.1:
            return z


class TestHyperboloidChart:
    def test_singular_locus(self):
        s = ExtendedState.singular_locus()
        h = to_hyperboloid(s.X, s.L1, s.LR)
        assert (h.w, h.b, h.c) == (0, 0, 0)
        assert h.d == pytest.approx(SINGULAR_D, abs=1e-15)

    def test_J_has_zero_w(self, rng):
        L1 = J * -1.2
        LR = Traceless(0.0, 0.3, -0.3)
        assert to_hyperboloid(J, L1, LR).w == 0

    def test_round_trip(self, rng):
        for _ in range(200):
            h = random_hyperboloid(rng)
            back = to_hyperboloid(*from_hyperboloid(h))
            assert np.max(np.abs(back.as_array() - h.as_array())) <= ROUND_TRIP_TOL
            assert back.d == pytest.approx(h.d, abs=ROUND_TRIP_TOL)

    def test_reconstructed_invariants(self, rng):
        from reinhardt.sl2 import trace_form

        for _ in range(100):
            h = random_hyperboloid(rng)
            X, L1, LR = from_hyperboloid(h)
            assert X.det == pytest.approx(1.0, abs=ROUND_TRIP_TOL)
            assert L1.det == pytest.approx(h.d, abs=ROUND_TRIP_TOL)
            assert abs(trace_form(LR, X)) <= ROUND_TRIP_TOL

    def test_branch_errors(self):
        with pytest.raises(BranchError):
            HyperboloidState(0j, 0j, 0j, 0.0)
        with pytest.raises(BranchError):
            HyperboloidState(0j, 0j, 0j, -1.0)
        with pytest.raises(BranchError):
            to_hyperboloid(J, J * 1.5, J * 0.0)  # L1 on the upper sheet
        with pytest.raises(BranchError):
            to_hyperboloid(J, Traceless(1.0, 0.0, 0.0), J * 0.0)  # det L1 < 0
        with pytest.raises(BranchError):
            to_hyperboloid(-J, J * -1.5, J * 0.0)


class TestHyperboloidField:
    def test_matches_lie_field(self, rng):
        for cset in (U_C, U_I):
            for _ in range(100):
                h = random_hyperboloid(rng)
                z = admissible_angle(rng, h, cset.beta1)
                ours = np.array(hyperboloid_field(h, cset, z))
                pushed = np.array(lie_field_in_hyperboloid(h, cset, z))
                assert np.max(np.abs(ours - pushed)) <= FIELD_TOL

    def test_b_equation(self, rng):
        for _ in range(50):
            h = random_hyperboloid(rng)
            db, _, _ = hyperboloid_field(h, U_C, admissible_angle(rng, h, U_C.beta1))
            expected = 2j * (bracket(h.b) * h.w + h.b * bracket(h.w))
            assert abs(db - expected) <= 1e-14

    def test_w_near_singular(self, rng):
        for _ in range(20):
            h = random_hyperboloid(rng, scale=1e-6, d=SINGULAR_D)
            _, dw, _ = hyperboloid_field(h, U_C, optimal_zstar(h, U_C))
            assert abs(dw + 1j * U_C.beta1 * h.c / abs(h.c)) <= 1e-4

    def test_star_violation(self):
        h = HyperboloidState(2.0 + 0j, 0j, 0.1 + 0j)
        with pytest.raises(StarViolation):
            hyperboloid_field(h, U_C, 1.0 + 0j)

    def test_hamiltonian_matches_extended(self, rng):
        for _ in range(100):
            h = random_hyperboloid(rng)
            z = admissible_angle(rng, h, U_C.beta1)
            X, L1, LR = from_hyperboloid(h)
            from reinhardt.controls import boundary_control

            assert hyperboloid_hamiltonian(h, U_C, z) == pytest.approx(
                hamiltonian(X, L1, LR, boundary_control(U_C, z)), abs=1e-10
            )

    def test_angular_momentum_matches_extended(self, rng):
        for _ in range(100):
            h = random_hyperboloid(rng)
            assert hyperboloid_angular_momentum(h) == pytest.approx(angular_momentum(extended_state(h)), abs=1e-12)
        assert hyperboloid_angular_momentum(HyperboloidState(0j, 0j, 0j)) == pytest.approx(3.0)

    def test_angular_momentum_conserved_along_optimal_flow(self, rng):
        for _ in range(3):
            s = random_persistent_state(rng, U_C)
            traj = integrate(s, ClosedLoopPolicy(U_C), 1.0, IntegratorConfig(step=1e-4, record_every=100))
            hyp = hyperboloid_series(traj.data)
            d = traj.series()["det_L1"]
            vals = [hyperboloid_angular_momentum(HyperboloidState(*row, dd)) for row, dd in zip(hyp, d)]
            assert np.ptp(vals) <= 1e-8

    def test_optimal_zstar_agrees_with_maximiser(self, rng):
        h = random_hyperboloid(rng, scale=0.01)
        X, L1, LR = from_hyperboloid(h)
        assert optimal_zstar(h) == pytest.approx(maximize_disk(X, L1, LR, U_C).z)


class TestTruncation:
    def test_ratios_vanish(self):
        eps = (1e-2, 1e-3, 1e-4)
        ratios = np.array([truncation_ratios(e) for e in eps])
        for k in range(3):
            assert ratios[0, k] > ratios[1, k] > ratios[2, k]
        assert np.all(ratios[-1] < 1e-3)

    def test_chain_map_intertwines_fields(self, rng):
        for beta1 in (1.0, 2.0):
            for _ in range(20):
                h = random_hyperboloid(rng, d=SINGULAR_D)
                tb, tw, tc = truncated_field(h, beta1)
                f = to_chain(h, beta1)
                mapped = np.array([tw / beta1, -1j * tb / (2 * beta1), tc / (6 * beta1)])
                assert np.max(np.abs(fuller_field(f) - mapped)) <= 1e-14

    def test_chain_round_trip(self, rng):
        h = random_hyperboloid(rng, d=SINGULAR_D)
        back = from_chain(to_chain(h, 2.0), 2.0)
        assert np.max(np.abs(back.as_array() - h.as_array())) <= 1e-15

    def test_truncated_invariants_are_chain_invariants(self, rng):
        for beta1 in (1.0, 2.0):
            for _ in range(20):
                h = random_hyperboloid(rng, d=SINGULAR_D)
                z = to_chain(h, beta1).z
                k = 6.0 * beta1 ** 2
                assert truncated_hamiltonian(h, beta1) == pytest.approx(k * H_c(z), abs=1e-12)
                assert truncated_angular_momentum(h) == pytest.approx(k * A_c(z), abs=1e-12)

    def test_truncated_field_singular(self):
        with pytest.raises(ArithmeticError):
            truncated_field(HyperboloidState(0.1 + 0j, 0j, 0j), 2.0)


class TestFullerChain:
    def test_state_validation(self):
        with pytest.raises(ValueError):
            FullerState(np.array([1.0 + 0j]))
        with pytest.raises(ValueError):
            FullerState(np.ones(3, dtype=complex), gamma=0.5j)
        with pytest.raises(ValueError):
            FullerState(np.ones(3, dtype=complex), gamma=1.0 + 0j)
        assert FullerState(np.ones(3, dtype=complex)).sign == 1.0

    def test_singular_chain(self):
        with pytest.raises(ArithmeticError):
            fuller_field(FullerState(np.array([1, 1, 0], dtype=complex)))

    def test_H_n_and_A_n_reduce_to_length_three(self, rng):
        for _ in range(20):
            z = random_chain(rng)
            f = FullerState(z)
            assert H_n(f) == pytest.approx(H_c(z), abs=1e-13)
            assert A_n(f) == pytest.approx(A_c(z), abs=1e-13)

    def test_conservation(self, rng):
        for _ in range(5):
            f = FullerState(random_chain(rng))
            _, rec = integrate_fuller(f, 1.0, step=1e-4, record_every=100)
            assert np.ptp([H_c(r) for r in rec]) <= DRIFT_PER_UNIT_TIME
            assert np.ptp([A_c(r) for r in rec]) <= DRIFT_PER_UNIT_TIME

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_length_n_conservation(self, rng, n):
        for _ in range(3):
            f = FullerState(random_chain(rng, n), chain_gamma(rng, n))
            _, rec = integrate_fuller(f, 1.0, step=1e-4, record_every=100)
            Hs = [H_n(FullerState(r, f.gamma)) for r in rec]
            As = [A_n(FullerState(r, f.gamma)) for r in rec]
            assert np.ptp(Hs) <= DRIFT_PER_UNIT_TIME
            assert np.ptp(As) <= DRIFT_PER_UNIT_TIME

    def test_scaling_symmetry(self, rng):
        f = FullerState(random_chain(rng))
        theta, r, T = 0.7, 1.6, 0.5
        _, a = integrate_fuller(f, T, step=1e-4)
        _, b = integrate_fuller(FullerState(scale_chain(f.z, theta, r)), r * T, step=1e-4)
        assert np.max(np.abs(scale_chain(a[-1], theta, r) - b[-1])) <= 1e-8

    def test_time_reversal(self, rng):
        f = FullerState(random_chain(rng))
        _, fwd = integrate_fuller(f, 0.8, step=1e-4)
        _, bwd = integrate_fuller(FullerState(time_reversal(f.z)), -0.8, step=1e-4)
        assert np.max(np.abs(time_reversal(fwd[-1]) - bwd[-1])) <= 1e-8

    def test_backward_integration_inverts(self, rng):
        f = FullerState(random_chain(rng))
        _, fwd = integrate_fuller(f, 0.5, step=1e-4)
        _, back = integrate_fuller(FullerState(fwd[-1]), -0.5, step=1e-4)
        assert np.max(np.abs(back[-1] - f.z)) <= 1e-8


class TestPoissonStructure:
    def test_invariants_commute(self, rng):
        worst = max(abs(poisson_bracket_c(H_c, A_c, random_chain(rng))) for _ in range(100))
        assert worst <= BRACKET_TOL

    def test_general_bracket_agrees_at_length_three(self, rng):
        F = lambda z: abs(z[0]) ** 2 * z[2].real
        for _ in range(20):
            z = random_chain(rng)
            assert poisson_bracket(F, H_c, z) == pytest.approx(poisson_bracket_c(F, H_c, z), abs=1e-7)

    def test_antisymmetry(self, rng):
        F = lambda z: (z[0] * z[1]).real + abs(z[2]) ** 2
        for _ in range(20):
            z = random_chain(rng)
            assert abs(poisson_bracket_c(F, F, z)) <= 1e-8
            assert poisson_bracket_c(F, H_c, z) == pytest.approx(-poisson_bracket_c(H_c, F, z), abs=1e-7)

    def test_hamiltonian_field_is_the_chain(self, rng):
        for _ in range(20):
            z = random_chain(rng)
            assert np.max(np.abs(hamiltonian_vector_field(H_c, z) - fuller_field(FullerState(z)))) <= 1e-8

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_length_n_field(self, rng, n):
        for _ in range(10):
            f = FullerState(random_chain(rng, n), chain_gamma(rng, n))
            G = lambda z: H_n(FullerState(z, f.gamma))
            assert np.max(np.abs(hamiltonian_vector_field(G, f.z) - fuller_field(f))) <= 1e-8

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_length_n_brackets(self, rng, n):
        for _ in range(10):
            f = FullerState(random_chain(rng, n), chain_gamma(rng, n))
            G = lambda z: H_n(FullerState(z, f.gamma))
            A = lambda z: A_n(FullerState(z, f.gamma))
            assert abs(poisson_bracket(A, G, f.z)) <= BRACKET_TOL
            assert poisson_bracket(A, G, f.z) == pytest.approx(-poisson_bracket(G, A, f.z), abs=BRACKET_TOL)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_symplectic_form_recovers_differential(self, rng, n):
        for _ in range(10):
            f = FullerState(random_chain(rng, n), chain_gamma(rng, n))
            G = lambda z: H_n(FullerState(z, f.gamma))
            Y = random_chain(rng, n)
            XH = hamiltonian_vector_field(G, f.z)
            assert symplectic_form(XH, Y) == pytest.approx(directional_derivative(G, f.z, Y), abs=1e-6)

    def test_symplectic_form_is_antisymmetric(self, rng):
        U, V = random_chain(rng, 4), random_chain(rng, 4)
        assert symplectic_form(U, V) == pytest.approx(-symplectic_form(V, U), abs=1e-14)


class TestLogSpiral:
    @pytest.mark.parametrize("direction", ["outward", "inward"])
    def test_field_residual(self, direction):
        ts = SPIRAL_TIMES if direction == "outward" else 2.5 - SPIRAL_TIMES
        z = log_spiral(ts, direction, T=2.5)
        dz = log_spiral_derivative(ts, direction, T=2.5)
        for k in range(ts.size):
            assert np.max(np.abs(fuller_field(FullerState(z[:, k])) - dz[:, k])) <= SPIRAL_TOL

    def test_derivative_matches_finite_difference(self):
        h = 1e-6
        for t in (0.1, 0.7, 1.9):
            fd = (log_spiral(t + h) - log_spiral(t - h)) / (2 * h)
            assert np.max(np.abs(fd - log_spiral_derivative(t))) <= 1e-8

    def test_invariants_vanish(self):
        for t in SPIRAL_TIMES:
            z = log_spiral(t)
            assert abs(H_c(z)) <= SPIRAL_TOL
            assert abs(A_c(z)) <= SPIRAL_TOL

    def test_closed_form_coefficients(self):
        z = log_spiral(1.0)
        assert z == pytest.approx([(2 - 1j) * (3 - 1j) / 10, (3 - 1j) / 10, 0.1], abs=1e-15)

    def test_inward_is_time_reversed_outward(self):
        T, t = 1.0, 0.3
        assert log_spiral(t, "inward", T) == pytest.approx(time_reversal(log_spiral(T - t)), abs=1e-15)

    def test_integration_follows_spiral(self):
        _, rec = integrate_fuller(spiral_state(0.5), 1.0, step=1e-4)
        assert np.max(np.abs(rec[-1] - log_spiral(1.5))) <= 1e-9

    def test_winding_per_doubling(self):
        for t in (1e-3, 1e-2, 0.5):
            assert control_winding(t, 2 * t) == pytest.approx(math.log(2.0) / (2 * math.pi), abs=1e-10)

    @pytest.mark.parametrize("t", [0.0, -1.0])
    def test_domain(self, t):
        with pytest.raises(ValueError):
            log_spiral(t)

    def test_bad_direction(self):
        with pytest.raises(ValueError):
            log_spiral(1.0, "sideways")


class TestValuations:
    def test_synthetic_powers(self):
        t = np.geomspace(1e-4, 1e-1, 50)
        for p in (1, 2, 3):
            fit = valuation_fit(t, 3.0 * t ** p)
            assert fit.slope == pytest.approx(p, abs=1e-12)
            assert fit.residual <= 1e-12

    def test_spiral_magnitudes(self):
        t = np.geomspace(1e-6, 1e-1, 200)
        z = log_spiral(t)
        for k in range(3):
            assert abs(valuation_fit(t, np.abs(z[k])).slope - (k + 1)) <= SLOPE_TOL

    def test_errors(self):
        with pytest.raises(ValueError):
            valuation_fit(np.arange(1, 5), np.ones(4))
        with pytest.raises(ValueError):
            valuation_fit(np.arange(1, 21), np.r_[np.ones(19), 0.0])

    def test_near_singular_full_system(self):
        run = near_singular_run()
        slopes = [f.slope for f in run.fits]
        print("near-singular slopes (w, b, c):", ", ".join(f"{s:.3f}" for s in slopes))
        assert not run.exited
        for s, target in zip(slopes, (1.0, 2.0, 3.0)):
            assert abs(s - target) <= EXPLORATORY_SLOPE_TOL


class TestExport:
    def test_rows_and_csv(self, tmp_path):
        ts = np.linspace(0.1, 1.0, 5)
        z = log_spiral(ts).T
        rows = fuller_rows(ts, z)
        assert rows.shape == (5, 9)
        np.testing.assert_allclose(rows[:, 7:], 0.0, atol=1e-12)
        p = tmp_path / "spiral.csv"
        fuller_csv(ts, z, p)
        assert p.read_text().splitlines()[0] == ",".join(FULLER_CSV_COLUMNS)

    def test_rows_shape_error(self):
        with pytest.raises(ValueError):
            fuller_rows(np.zeros(2), np.zeros((2, 4), dtype=complex))

    def test_svg(self):
        assert spiral_svg().count("<polyline") == 3

    def test_hyperboloid_series(self, rng):
        s = random_near_singular(rng, scale=0.05)
        h = to_hyperboloid(s.X, s.L1, s.LR)
        row = hyperboloid_series(s.as_array()[None, :])[0]
        assert row == pytest.approx(h.as_array(), abs=1e-13)

    def test_sesq(self):
        assert sesq(1j, 1j) == 1.0
        assert sesq(1.0 + 0j, 1j) == 0.0
