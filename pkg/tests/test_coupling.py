"""Coupled pair dynamics, coupling times, Girsanov weights."""

import numpy as np
import pytest

from dissipsde.coupling import (
    CouplingConfig,
    coupled_step,
    girsanov_increment,
    girsanov_moment_bound,
    simulate_coupled,
    simulate_coupled_batch,
    xi_schedule,
)
from dissipsde.spectral import build_diagonal_model, build_dirichlet_model


def flat_model():
    """Essentially driftless, rate ~ 0 (for the omega -> 0 schedule)."""
    return build_diagonal_model([-1e-15], 1.0, omega=0.0)


class TestXiSchedule:
    def test_closed_form(self):
        want = 2.0 / (1.0 - np.exp(-2.0))
        assert xi_schedule(1.0, 1.0, 1.0, 0.0) == pytest.approx(want, rel=1e-12)

    def test_omega_zero_limit(self):
        assert xi_schedule(0.0, 2.0, 3.0, 0.7) == pytest.approx(1.5)
        assert xi_schedule(1e-14, 2.0, 3.0, 0.0) == pytest.approx(1.5, rel=1e-9)

    def test_coupled_at_start(self):
        assert xi_schedule(1.0, 1.0, 0.0, 0.5) == 0.0

    def test_sign_symmetry_negative_omega(self):
        # numerator and denominator are both negative for omega < 0
        assert xi_schedule(-np.pi**2, 1.0, 1.0, 0.3) > 0.0


class TestCoupledStep:
    def test_on_diagonal(self):
        m = build_diagonal_model([-1.0], 1.0)
        cfg = CouplingConfig(dt=0.1, t_end=1.0, glue_tol=1e-8)
        x, y, glued = coupled_step(m, cfg, np.array([1.0]), np.array([1.0]),
                                   0.0, np.array([0.3]))
        assert glued and np.array_equal(x, y)

    def test_deterministic_ode_coupling(self):
        # F = 0, A ~ 0, no noise: |x-y| shrinks by dt/T per step, meets at T
        m = flat_model()
        cfg = CouplingConfig(dt=1e-3, t_end=1.0, glue_tol=1e-4)
        x, y = np.array([1.0]), np.array([0.0])
        t = 0.0
        dists = [1.0]
        while t < 1.0 - 1e-12:
            x, y, glued = coupled_step(m, cfg, x, y, t, np.array([0.0]), dist0=1.0)
            t += cfg.dt
            dists.append(abs(x[0] - y[0]))
            if glued:
                break
        steps_of_decay = np.diff(dists[:500])
        np.testing.assert_allclose(steps_of_decay, -1e-3, rtol=1e-9)
        assert glued and t <= 1.0 + 1e-9

    def test_one_step_contraction_inequality(self):
        m = build_dirichlet_model(3, None, 1e-8)
        cfg = CouplingConfig(dt=1e-3, t_end=1.0, glue_tol=1e-12)
        x = np.array([1.0, 0.3, -0.2])
        y = np.array([0.2, 0.0, 0.4])
        x2, y2, _ = coupled_step(m, cfg, x, y, 0.0, np.zeros(3))
        lhs = np.exp(-m.omega * cfg.dt) * np.linalg.norm(x2 - y2)
        assert lhs <= np.linalg.norm(x - y) + 10 * cfg.dt**2


class TestSimulateCoupled:
    def test_identical_starts(self):
        m = build_diagonal_model([-1.0], 1.0)
        cfg = CouplingConfig(dt=0.05, t_end=0.5, seed=2)
        rec = simulate_coupled(m, cfg, np.array([1.0]), np.array([1.0]))
        assert rec.tau == 0.0 and rec.log_R == 0.0
        np.testing.assert_array_equal(rec.x_path.states, rec.y_path.states)

    def test_ou_couples_before_horizon(self):
        m = build_diagonal_model([-1.0], 1.0)
        cfg = CouplingConfig(dt=1e-3, t_end=2.0, glue_tol=1e-4, seed=5)
        res = simulate_coupled_batch(m, cfg, np.array([1.0]), np.array([0.0]), 1000)
        assert res.coupled_fraction >= 0.99
        assert np.all(res.post_tau_identical)

    def test_contraction_series_nonincreasing(self):
        m = build_diagonal_model([-1.0], 1.0)
        cfg = CouplingConfig(dt=1e-3, t_end=2.0, glue_tol=1e-4, seed=6)
        rec = simulate_coupled(m, cfg, np.array([1.0]), np.array([0.0]))
        slack = 10 * cfg.dt * (0.0 + 1.0)
        assert np.max(np.diff(rec.contraction_series)) <= slack

    def test_batch_matches_single(self):
        m = build_dirichlet_model(3, None, 1.0)
        cfg0 = CouplingConfig(dt=1e-2, t_end=1.0, glue_tol=1e-3, seed=9)
        x0 = np.array([0.6, 0.0, 0.8])
        y0 = np.zeros(3)
        batch = simulate_coupled_batch(m, cfg0, x0, y0, 5)
        for sid in (0, 3):
            cfg = CouplingConfig(dt=1e-2, t_end=1.0, glue_tol=1e-3, seed=9,
                                 stream_id=sid)
            rec = simulate_coupled(m, cfg, x0, y0)
            assert rec.tau == batch.tau[sid]
            assert rec.log_R == batch.log_r[sid]


class TestGirsanov:
    def test_increment_zero_when_coupled(self):
        m = build_diagonal_model([-1.0], 1.0)
        cfg = CouplingConfig(dt=0.01, t_end=1.0, glue_tol=1e-8)
        inc = girsanov_increment(m, cfg, np.array([1.0]), np.array([1.0]),
                                 0.0, np.array([0.5]), 0.01)
        assert inc == 0.0

    def test_deterministic_part(self):
        # noise = 0, sigma = I: increment = -xi^2/2 dt (clamp inactive)
        m = build_diagonal_model([-1.0], 1.0)
        cfg = CouplingConfig(dt=1e-4, t_end=1.0, glue_tol=1e-8)
        x, y = np.array([2.0]), np.array([0.0])
        inc = girsanov_increment(m, cfg, x, y, 0.0, np.array([0.0]), 1e-4)
        xi = xi_schedule(-1.0, 1.0, 2.0, 0.0)
        assert inc == pytest.approx(-0.5 * xi**2 * 1e-4, rel=1e-9)

    def test_martingale_normalization(self):
        m = build_diagonal_model([-1.0], 1.0)
        cfg = CouplingConfig(dt=1e-3, t_end=1.0, glue_tol=1e-4, seed=12)
        res = simulate_coupled_batch(m, cfg, np.array([1.0]), np.array([0.0]), 2000)
        w = np.exp(res.log_r)
        se = w.std(ddof=1) / np.sqrt(2000)
        assert abs(w.mean() - 1.0) <= 3 * se

    def test_moment_bound_examples(self):
        assert girsanov_moment_bound(1.0, 2.0, 1.0, 1.0, 0.0) == 1.0
        want = np.exp(2.0 / (1.0 - np.exp(-2.0)))
        assert girsanov_moment_bound(1.0, 2.0, 1.0, 1.0, 1.0) == pytest.approx(want, rel=1e-12)
        # p -> infinity: exponent tends to w d^2 / (1 - e^{-2wT})
        want_inf = np.exp(1.0 / (1.0 - np.exp(-2.0)))
        assert girsanov_moment_bound(1.0, 1e12, 1.0, 1.0, 1.0) == pytest.approx(want_inf, rel=1e-9)

    def test_empirical_moment_below_bound(self):
        m = build_diagonal_model([-1.0], 1.0)
        cfg = CouplingConfig(dt=1e-3, t_end=2.0, glue_tol=1e-4, seed=13)
        res = simulate_coupled_batch(m, cfg, np.array([1.0]), np.array([0.0]), 2000)
        for p in (1.5, 2.0, 4.0):
            q = p / (p - 1.0)
            vals = np.exp(q * res.log_r)
            emp = vals.mean() ** (p - 1.0)
            rel = (p - 1.0) * vals.std(ddof=1) / np.sqrt(2000) / vals.mean()
            bound = girsanov_moment_bound(1.0, p, -1.0, 2.0, 1.0)
            assert emp <= bound * (1.0 + 3.0 * rel)
