"""Model assembly, Nemytskii lifts, Theta and G functionals."""

import numpy as np
import pytest

from dissipsde.errors import DimensionMismatch, InfeasibleQ, InvalidSigma
from dissipsde.monotone import CubicPart, LinearPart, sign_map
from dissipsde.spectral import (
    NemytskiiLift,
    ThetaFunctional,
    build_diagonal_model,
    build_dirichlet_model,
    default_q,
    dissipativity_gap,
    g_functional,
    growth_constant_518,
    lift_drift,
    theta_value,
)


class TestDirichletModel:
    def test_eigenvalues(self):
        m = build_dirichlet_model(3, None, 1.0)
        np.testing.assert_allclose(m.a_eigs, -np.pi**2 * np.array([1.0, 4.0, 9.0]))
        assert m.omega == -np.pi**2

    def test_zero_drift(self):
        m = build_dirichlet_model(4, None, 1.0)
        x = np.random.default_rng(0).normal(0, 1, 4)
        np.testing.assert_array_equal(m.drift(x), np.zeros(4))

    def test_sign_drift_one_mode(self):
        m = build_dirichlet_model(1, sign_map(), 1.0, alpha=1e-2)
        # the lift of -sign on c*e_1 points against c, and is dissipative
        for c in (0.5, 1.0, -0.7):
            val = m.drift(np.array([c]))[0]
            assert val * c < 0
        rng = np.random.default_rng(1)
        x = rng.normal(0, 1, (200, 1))
        y = rng.normal(0, 1, (200, 1))
        assert dissipativity_gap(m.drift, x, y) <= 1e-9

    def test_invalid_sigma(self):
        with pytest.raises(InvalidSigma):
            build_dirichlet_model(2, None, [[1.0, 2.0], [2.0, 1.0]])  # eig -1

    def test_sigma_inv_norm_default(self):
        m = build_dirichlet_model(2, None, 0.5)
        assert m.sigma_inv_norm == pytest.approx(2.0)


class TestNemytskiiLift:
    def test_linear_is_diagonal(self):
        lift = NemytskiiLift(scalar_fn=LinearPart(-1.0), n=8, grid_size=512)
        coeffs = np.arange(1.0, 9.0)
        np.testing.assert_allclose(lift_drift(lift, coeffs), -coeffs, atol=1e-6)

    def test_zero_input(self):
        lift = NemytskiiLift(scalar_fn=LinearPart(-1.0), n=4, grid_size=64)
        np.testing.assert_array_equal(lift_drift(lift, np.zeros(4)), np.zeros(4))

    def test_cubic_against_dense_quadrature(self):
        coarse = NemytskiiLift(scalar_fn=CubicPart(), n=8, grid_size=64)
        dense = NemytskiiLift(scalar_fn=CubicPart(), n=8, grid_size=4096)
        e1 = np.eye(8)[0]
        np.testing.assert_allclose(coarse(e1), dense(e1), atol=1e-8)
        # analytic first coefficient: -(sqrt2 sin)^3 against sqrt2 sin is
        # -4 * int sin^4 = -4 * 3/8
        assert coarse(e1)[0] == pytest.approx(-1.5, abs=1e-10)

    def test_antialiasing_floor(self):
        with pytest.raises(ValueError):
            NemytskiiLift(scalar_fn=LinearPart(-1.0), n=8, grid_size=15)

    def test_dimension_mismatch(self):
        lift = NemytskiiLift(scalar_fn=LinearPart(-1.0), n=4, grid_size=64)
        with pytest.raises(DimensionMismatch):
            lift(np.zeros(5))

    def test_projection_consistency_identity_scaled(self):
        # f(s) = -2s reproduces -2*coeffs for anything already in the span
        lift = NemytskiiLift(scalar_fn=LinearPart(-2.0), n=6, grid_size=48)
        rng = np.random.default_rng(4)
        coeffs = rng.normal(0, 1, 6)
        np.testing.assert_allclose(lift(coeffs), -2.0 * coeffs, atol=1e-10)

    def test_strong_dissipativity_transfer(self):
        # (f(s)-f(t))(s-t) <= -eta (s-t)^2 with eta = 2 transfers to the lift
        eta = 2.0
        m = build_dirichlet_model(6, {
            "continuous": {"name": "linear", "a": -eta},
            "growth": {"c3": eta, "m": 1},
        }, 1.0, regularization="minimal_section")
        rng = np.random.default_rng(5)
        x = rng.normal(0, 1, (100, 6))
        y = rng.normal(0, 1, (100, 6))
        fx = np.asarray(m.drift(x))
        fy = np.asarray(m.drift(y))
        inner = np.sum((fx - fy) * (x - y), axis=1)
        dist2 = np.sum((x - y) ** 2, axis=1)
        assert np.all(inner <= -eta * dist2 * (1.0 - 1e-9) + 1e-12)


class TestTheta:
    def test_zero(self):
        T = ThetaFunctional(np.array([2.0, 5.0]), np.array([1.0, 2.0]))
        assert theta_value(T, np.zeros(2)) == 0.0

    def test_direct_substitution(self):
        T = ThetaFunctional(np.array([2.0, 5.0]), np.array([1.0, 2.0]))
        assert theta_value(T, np.array([1.0, 1.0])) == pytest.approx(4.5)

    def test_dominates_norm_squared(self):
        lam = 1.0 + np.pi**2 * np.arange(1, 9) ** 2
        T = ThetaFunctional(lam, default_q(lam))
        x = np.random.default_rng(6).normal(0, 1, (200, 8))
        assert np.all(theta_value(T, x) >= np.sum(x * x, axis=1) - 1e-12)

    def test_rejects_bad_q(self):
        with pytest.raises(ValueError):
            ThetaFunctional(np.array([2.0, 5.0]), np.array([3.0, 4.0]))


class TestDefaultQ:
    def test_shifted_dirichlet(self):
        lam = 1.0 + np.pi**2 * np.arange(1, 5) ** 2
        np.testing.assert_allclose(default_q(lam),
                                   np.arange(1, 5) ** 1.5, atol=1e-5)

    def test_linear_spectrum_infeasible(self):
        with pytest.raises(InfeasibleQ):
            default_q(np.arange(1.0, 5.0))

    def test_partial_sum_below_zeta_three_halves(self):
        i = np.arange(1, 10_001, dtype=float)
        assert np.sum(i**-1.5) <= 2.6124


class TestGFunctional:
    def setup_method(self):
        self.lift = NemytskiiLift(scalar_fn=LinearPart(-1.0), n=8, grid_size=64)

    def test_zero(self):
        assert g_functional(self.lift, np.zeros(8), m=2) == 0.0

    def test_unit_constant_on_grid(self):
        vals = np.ones(self.lift.grid_size + 1)
        assert g_functional(self.lift, m=2, grid_values=vals) == pytest.approx(1.0)

    def test_normalized_basis_function(self):
        e1 = np.eye(8)[0]
        assert g_functional(self.lift, e1, m=1) == pytest.approx(1.0, abs=1e-12)


class TestGrowthBoundTransfer:
    def test_example_drift_growth(self):
        m = build_dirichlet_model(8, sign_map(), 1.0, alpha=1e-2, q_coeffs=0.5)
        rng = np.random.default_rng(7)
        calibrate = rng.normal(0, 0.5, (300, 8))
        check = rng.normal(0, 0.5, (300, 8))
        C = growth_constant_518(m, calibrate, m=1)
        assert np.isfinite(C) and C <= 1.0  # |F| <= 1 for the sign drift
        fx = np.linalg.norm(np.asarray(m.drift(check)), axis=1)
        envelope = 1.0 + np.linalg.norm(check, axis=1) + np.sqrt(
            theta_value(m.theta, check))
        assert np.all(fx <= 1.1 * C * envelope + 1e-9)


class TestDiagonalModel:
    def test_one_mode_ou(self):
        m = build_diagonal_model([-1.0], 1.0)
        assert m.omega == -1.0
        # lambda = 1 + omega - a = 1 sits exactly on the default-q boundary
        assert m.theta is None
        m2 = build_diagonal_model([-1.0], 1.0, q_coeffs=[0.5])
        np.testing.assert_allclose(m2.theta.lambda_eigs, [1.0])
        np.testing.assert_allclose(m2.theta.q_coeffs, [0.5])

    def test_a_above_omega_rejected(self):
        with pytest.raises(ValueError):
            build_diagonal_model([-1.0, -2.0], 1.0, omega=-1.5)
