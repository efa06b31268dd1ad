"""Filled graphs, resolvents, Yosida maps, smoothing."""

import numpy as np
import pytest

from dissipsde.errors import DimensionMismatch, IterationLimit
from dissipsde.monotone import (
    MultivaluedScalarMap,
    SmoothedMap,
    SmoothingParams,
    YosidaMap,
    YosidaParams,
    cubic_map,
    default_b_coeffs,
    fill_graph,
    growth_constant,
    linear_map,
    minimal_section,
    resolvent_scalar,
    scalar_map_from_spec,
    sign_map,
    smooth_yosida,
    smoothing_nodes,
    staircase_map,
    yosida_scalar,
)

ALL_MAPS = {
    "linear": linear_map(-1.0),
    "sign": sign_map(),
    "cubic": cubic_map(),
    "staircase": staircase_map(),
}


def grid_oracle_resolvent(f, alpha, r, lo=-10.0, hi=10.0, n=2_000_001):
    """Brute-force scan: the s whose filled g-interval comes closest to r."""
    s = np.linspace(lo, hi, n)
    flo, fhi = f.interval(s)
    gmin = s - alpha * fhi
    gmax = s - alpha * flo
    dist = np.maximum.reduce([gmin - r, r - gmax, np.zeros_like(s)])
    return s[np.argmin(dist)]


class TestFillGraph:
    def test_sign_jump(self):
        assert fill_graph(sign_map(), 0.0) == (-1.0, 1.0)

    def test_linear_continuous(self):
        assert fill_graph(linear_map(-1.0), 2.0) == (-2.0, -2.0)

    def test_single_jump_away_from_jump(self):
        f = scalar_map_from_spec({
            "continuous": {"name": "steps"},
            "breakpoints": [[0.0, 1.0, -1.0]],
            "growth": {"c3": 1.0, "m": 1},
        })
        lo, hi = fill_graph(f, 0.5)
        assert lo == hi == -1.0

    def test_jump_ordering_enforced(self):
        with pytest.raises(ValueError):
            MultivaluedScalarMap(
                breakpoints=np.array([0.0]),
                left_limits=np.array([-1.0]),
                right_limits=np.array([1.0]),  # f(s+) > f(s-): not monotone
                continuous_part=lambda s: np.zeros_like(np.asarray(s)),
            )


class TestResolvent:
    def test_linear_closed_form(self):
        f = linear_map(-1.0)
        assert resolvent_scalar(f, YosidaParams(alpha=0.5), 3.0) == pytest.approx(2.0, abs=1e-10)

    def test_sign_dead_zone_grid_oracle(self):
        f = sign_map()
        p = YosidaParams(alpha=1.0)
        for r in (0.5, 3.0, -0.2, 1.0):
            j = resolvent_scalar(f, p, r)
            oracle = grid_oracle_resolvent(f, 1.0, r)
            assert j == pytest.approx(oracle, abs=2e-5)
        assert resolvent_scalar(f, p, 0.5) == pytest.approx(0.0, abs=1e-10)
        assert resolvent_scalar(f, p, 3.0) == pytest.approx(2.0, abs=1e-10)

    def test_staircase_grid_oracle(self):
        f = staircase_map()
        p = YosidaParams(alpha=0.5)
        for r in (-3.0, -1.2, 0.3, 1.3, 4.0):
            j = resolvent_scalar(f, p, r)
            assert j == pytest.approx(grid_oracle_resolvent(f, 0.5, r), abs=2e-5)

    def test_iteration_limit(self):
        f = linear_map(-50.0)  # bracket needs widening
        with pytest.raises(IterationLimit):
            resolvent_scalar(f, YosidaParams(alpha=1.0, max_iter=2), 100.0)

    def test_nonexpansive(self):
        rng = np.random.default_rng(7)
        for name, f in ALL_MAPS.items():
            p = YosidaParams(alpha=0.3)
            r1 = rng.uniform(-1.5, 1.5, 1000)
            r2 = rng.uniform(-1.5, 1.5, 1000)
            j1 = resolvent_scalar(f, p, r1)
            j2 = resolvent_scalar(f, p, r2)
            assert np.all(np.abs(j1 - j2) <= np.abs(r1 - r2) + 2 * p.bisection_tol), name


class TestYosida:
    def test_linear_closed_form(self):
        f = linear_map(-1.0)
        assert yosida_scalar(f, YosidaParams(alpha=0.5), 2.0) == pytest.approx(-4.0 / 3.0, abs=1e-10)

    def test_sign_value(self):
        assert yosida_scalar(sign_map(), YosidaParams(alpha=1.0), 0.5) == pytest.approx(-0.5, abs=1e-10)

    def test_fixed_point_when_zero_in_graph(self):
        # f continuous with f(r) = 0 at r = 0: J(0) = 0, F(0) = 0
        for f in (linear_map(-2.0), cubic_map()):
            assert yosida_scalar(f, YosidaParams(alpha=0.7), 0.0) == pytest.approx(0.0, abs=1e-10)

    @pytest.mark.parametrize("name", sorted(ALL_MAPS))
    def test_dissipative_and_lipschitz(self, name):
        f = ALL_MAPS[name]
        rng = np.random.default_rng(11)
        alpha = 0.2
        p = YosidaParams(alpha=alpha)
        r1 = rng.uniform(-1.5, 1.5, 1000)
        r2 = rng.uniform(-1.5, 1.5, 1000)
        f1 = yosida_scalar(f, p, r1)
        f2 = yosida_scalar(f, p, r2)
        assert np.max((f1 - f2) * (r1 - r2)) <= 1e-9
        assert np.all(np.abs(f1 - f2) <= (2.0 / alpha) * np.abs(r1 - r2) + 1e-9)

    @pytest.mark.parametrize("name", sorted(ALL_MAPS))
    def test_domination_by_minimal_section(self, name):
        f = ALL_MAPS[name]
        rng = np.random.default_rng(13)
        r = rng.uniform(-1.5, 1.5, 1000)
        p = YosidaParams(alpha=0.15)
        fa = yosida_scalar(f, p, r)
        f0 = minimal_section(f, r)
        assert np.all(np.abs(fa) <= np.abs(f0) + 1e-9), name

    @pytest.mark.parametrize("name", sorted(ALL_MAPS))
    def test_convergence_at_continuity_points(self, name):
        f = ALL_MAPS[name]
        rng = np.random.default_rng(17)
        r = rng.uniform(-1.5, 1.5, 500)
        for bp in f.breakpoints:  # keep clear of the jumps
            r = r[np.abs(r - bp) > 0.05]
        f0 = minimal_section(f, r)
        errs = []
        for alpha in (1e-1, 1e-2, 1e-3):
            fa = yosida_scalar(f, YosidaParams(alpha=alpha), r)
            errs.append(np.abs(fa - f0))
        assert np.all(errs[1] <= errs[0] + 1e-9)
        assert np.all(errs[2] <= errs[1] + 1e-9)
        assert np.all(errs[2] <= 1e-2 * (1.0 + np.abs(f0)))


class TestMinimalSection:
    def test_sign_at_zero(self):
        assert minimal_section(sign_map(), 0.0) == 0.0

    def test_positive_interval(self):
        f = scalar_map_from_spec({
            "continuous": {"name": "steps"},
            "breakpoints": [[0.0, 5.0, 2.0]],
            "growth": {"c3": 5.0, "m": 1},
        })
        assert minimal_section(f, 0.0) == 2.0

    def test_negative_interval(self):
        f = scalar_map_from_spec({
            "continuous": {"name": "steps"},
            "breakpoints": [[0.0, -2.0, -5.0]],
            "growth": {"c3": 5.0, "m": 1},
        })
        assert minimal_section(f, 0.0) == -2.0


class TestSmoothing:
    def setup_method(self):
        self.sp = SmoothingParams(beta=0.1, b_coeffs=default_b_coeffs(3),
                                  node_count=64, node_seed=5)

    def test_linear_closed_form(self):
        # F(x) = -x integrates exactly: F_ab(x) = -e^{2 beta B} x, and the
        # antithetic nodes cancel the linear noise term exactly
        F = lambda x: -np.asarray(x, dtype=float)
        x = np.array([1.0, -0.5, 2.0])
        got = smooth_yosida(F, self.sp, x)
        want = -np.exp(-2 * 0.1 * self.sp.b_coeffs) * x
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_beta_to_zero_converges_to_base_map(self):
        f = sign_map()
        base = YosidaMap(f, YosidaParams(alpha=0.1))
        x = np.array([0.7, -0.3, 0.2])
        errs = []
        for beta in (1e-1, 1e-2, 1e-3):
            sp = SmoothingParams(beta=beta, b_coeffs=default_b_coeffs(3),
                                 node_count=256, node_seed=5)
            errs.append(np.linalg.norm(smooth_yosida(base, sp, x) - base(x)))
        assert errs[2] < errs[0]
        assert errs[2] < 5e-2

    def test_odd_map_at_origin(self):
        F = lambda x: -np.sign(x) * np.abs(x) ** 3
        got = smooth_yosida(F, self.sp, np.zeros(3))
        np.testing.assert_allclose(got, 0.0, atol=1e-14)  # antithetic exact

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            smooth_yosida(lambda x: x, self.sp, np.zeros(5))

    def test_smoothed_dissipativity_shared_nodes(self):
        f = sign_map()
        sm = SmoothedMap(YosidaMap(f, YosidaParams(alpha=0.1)), self.sp)
        rng = np.random.default_rng(3)
        x = rng.normal(0, 1, (200, 3))
        y = rng.normal(0, 1, (200, 3))
        inner = np.sum((sm(x) - sm(y)) * (x - y), axis=1)
        assert np.max(inner) <= 1e-9

    def test_nodes_deterministic(self):
        np.testing.assert_array_equal(smoothing_nodes(self.sp),
                                      smoothing_nodes(self.sp))


class TestGrowthConstant:
    def test_zero_map(self):
        assert growth_constant(lambda x: np.zeros_like(x), np.zeros((1, 3))) == 0.0

    def test_linear_probes(self):
        sp = SmoothingParams(beta=0.1, b_coeffs=default_b_coeffs(3),
                             node_count=32, node_seed=1)
        F = lambda x: -np.asarray(x, dtype=float)
        sm = lambda x: smooth_yosida(F, sp, x)
        e1 = np.eye(3)[0]
        got = growth_constant(sm, np.stack([np.zeros(3), e1]))
        want = np.exp(-2 * 0.1 * 1.0) / 2.0
        assert got == pytest.approx(want, rel=1e-12)

    def test_sign_smoothed_bounded_by_one(self):
        sp = SmoothingParams(beta=0.05, b_coeffs=default_b_coeffs(2),
                             node_count=64, node_seed=2)
        base = YosidaMap(sign_map(), YosidaParams(alpha=0.1))
        sm = SmoothedMap(base, sp)
        rng = np.random.default_rng(8)
        probes = rng.normal(0, 2, (50, 2))
        assert growth_constant(sm, probes) <= 1.0 + 1e-9

    def test_empty_probes(self):
        with pytest.raises(ValueError):
            growth_constant(lambda x: x, np.zeros((0, 2)))
