"""Scalar maximal dissipative operator toolkit.

A nonincreasing real function f with jump discontinuities is stored as its
filled graph: at a jump s_i the function value is the whole interval
[f(s_i+), f(s_i-)].  On top of that the module provides the resolvent
J_a(r) (the unique s with r in s - a*fbar(s)), the Yosida map
F_a = (J_a - I)/a, the minimal section of the filled graph, and a
fixed-node Gaussian smoothing of coordinatewise maps.

All evaluators are vectorized over numpy arrays and free of mutable state,
so they can be shared across worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, IterationLimit
from .rng import node_rng


# ---------------------------------------------------------------------------
# continuous parts (registry)

class LinearPart:
    """f(s) = a*s; nonincreasing for a <= 0."""

    def __init__(self, a: float):
        self.a = float(a)

    def __call__(self, s):
        return self.a * np.asarray(s, dtype=float)


class OddPowerPart:
    """f(s) = -sign(s)|s|^m, nonincreasing for any m >= 1."""

    def __init__(self, m: int):
        self.m = int(m)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return -np.sign(s) * np.abs(s) ** self.m


class CubicPart:
    """f(s) = -s^3."""

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return -(s**3)


class TablePart:
    """Linear interpolation through (xs, ys) knots, constant beyond the ends."""

    def __init__(self, xs: Sequence[float], ys: Sequence[float]):
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        if self.xs.ndim != 1 or self.xs.shape != self.ys.shape or self.xs.size < 2:
            raise ValueError("table part needs matching 1-d knot arrays, >= 2 knots")
        if np.any(np.diff(self.xs) <= 0):
            raise ValueError("table knots must be strictly increasing")

    def __call__(self, s):
        return np.interp(np.asarray(s, dtype=float), self.xs, self.ys)


class StepsPart:
    """Piecewise constant between breakpoints, read off the jump limits.

    On the open segment between breakpoints i and i+1 the value is the
    right limit at breakpoint i; below the first breakpoint the left limit
    of the first, above the last the right limit of the last.
    """

    def __init__(self, breakpoints, left_limits, right_limits):
        self.breakpoints = np.asarray(breakpoints, dtype=float)
        self.left_limits = np.asarray(left_limits, dtype=float)
        self.right_limits = np.asarray(right_limits, dtype=float)
        if self.breakpoints.size == 0:
            raise ValueError("steps part requires at least one breakpoint")
        self.segment_values = np.concatenate(
            ([self.left_limits[0]], self.right_limits))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.breakpoints, s, side="right")
        return self.segment_values[idx]


class ZeroPart:
    """f = 0."""

    def __call__(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultivaluedScalarMap:
    """Filled graph of a nonincreasing scalar function with jumps.

    breakpoints are the jump locations (sorted); left_limits/right_limits
    hold f(s_i-) and f(s_i+).  continuous_part evaluates f away from the
    breakpoints.  growth = (c3, m) records |f(s)| <= c3*(1+|s|^m).
    """

    breakpoints: np.ndarray
    left_limits: np.ndarray
    right_limits: np.ndarray
    continuous_part: Callable
    growth: tuple = (1.0, 1)
    name: str = "scalar_map"

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", np.asarray(self.breakpoints, dtype=float))
        object.__setattr__(self, "left_limits", np.asarray(self.left_limits, dtype=float))
        object.__setattr__(self, "right_limits", np.asarray(self.right_limits, dtype=float))
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(self.right_limits > self.left_limits + 1e-15):
            raise ValueError("need f(s+) <= f(s-) at every jump (nonincreasing f)")
        c3, m = self.growth
        if c3 < 0 or int(m) < 1:
            raise ValueError("growth bound requires c3 >= 0 and integer m >= 1")

    def interval(self, s):
        """Filled-graph value [lo, hi] at s, vectorized."""
        s = np.asarray(s, dtype=float)
        lo = np.asarray(self.continuous_part(s), dtype=float).copy()
        hi = lo.copy()
        if self.breakpoints.size:
            idx = np.searchsorted(self.breakpoints, s.ravel())
            idx = np.clip(idx, 0, self.breakpoints.size - 1)
            at_jump = self.breakpoints[idx] == s.ravel()
            if np.any(at_jump):
                flat_lo = lo.reshape(-1)
                flat_hi = hi.reshape(-1)
                flat_lo[at_jump] = self.right_limits[idx[at_jump]]
                flat_hi[at_jump] = self.left_limits[idx[at_jump]]
        return lo, hi

    def growth_bound(self, s):
        c3, m = self.growth
        return c3 * (1.0 + np.abs(np.asarray(s, dtype=float)) ** m)


@dataclass(frozen=True)
class YosidaParams:
    alpha: float
    bisection_tol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.bisection_tol <= 0:
            raise ValueError("bisection_tol must be > 0")


@dataclass(frozen=True)
class SmoothingParams:
    """Parameters of the Gaussian smoothing layer.

    b_coeffs are the (positive) eigenvalues of -B; the smoothing measure is
    the centered Gaussian with per-coordinate variance (1-exp(-2*beta*b))/(2b).
    """

    beta: float
    b_coeffs: np.ndarray
    node_count: int = 64
    node_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "b_coeffs", np.asarray(self.b_coeffs, dtype=float))
        if not (0.0 < self.beta <= 1.0):
            raise ValueError("beta must lie in (0, 1]")
        if np.any(self.b_coeffs <= 0):
            raise ValueError("all b_coeffs must be > 0")
        if self.node_count < 2 or self.node_count % 2:
            raise ValueError("node_count must be an even integer >= 2")

    @property
    def dim(self) -> int:
        return self.b_coeffs.size

    def node_variances(self) -> np.ndarray:
        b = self.b_coeffs
        return (1.0 - np.exp(-2.0 * self.beta * b)) / (2.0 * b)

    def contraction(self) -> np.ndarray:
        """Diagonal of exp(beta*B) = exp(-beta*b)."""
        return np.exp(-self.beta * self.b_coeffs)


def default_b_coeffs(n: int) -> np.ndarray:
    """b_i = i^2, so the smoothing covariance stays trace class at any n."""
    return np.arange(1, n + 1, dtype=float) ** 2


def smoothing_nodes(sp: SmoothingParams) -> np.ndarray:
    """Fixed antithetic Gaussian node table, shape (node_count, dim)."""
    half = sp.node_count // 2
    rng = node_rng(sp.node_seed)
    z = rng.standard_normal((half, sp.dim)) * np.sqrt(sp.node_variances())
    return np.concatenate([z, -z], axis=0)


# ---------------------------------------------------------------------------
# operations

def fill_graph(f: MultivaluedScalarMap, s):
    """[f(s+), f(s-)] at jumps, the singleton [f(s), f(s)] elsewhere."""
    lo, hi = f.interval(s)
    if np.isscalar(s) or np.asarray(s).ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def minimal_section(f: MultivaluedScalarMap, s):
    """Element of the filled graph with minimal absolute value."""
    lo, hi = f.interval(s)
    out = np.where(lo > 0, lo, np.where(hi < 0, hi, 0.0))
    if np.isscalar(s) or np.asarray(s).ndim == 0:
        return float(out)
    return out


def resolvent_scalar(f: MultivaluedScalarMap, p: YosidaParams, r):
    """Resolvent J_a(r): the unique s with r in s - a*fbar(s).

    The map g(s) = s - a*fbar(s) is strictly increasing with slope >= 1 and
    jumps upward exactly at the breakpoints, so each jump owns a closed
    "dead zone" [s_i - a f(s_i-), s_i - a f(s_i+)] in g-space.  Inputs in a
    dead zone resolve exactly to the breakpoint; the rest bisect on the
    continuous part inside the enclosing segment (unconditionally safe even
    for discontinuous f, since g is monotone).  Piecewise-constant parts
    skip the bisection entirely: within a segment g is s - a*const.
    """
    scalar_in = np.isscalar(r) or np.asarray(r).ndim == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    a = p.alpha
    out = np.empty_like(r)
    bps = f.breakpoints

    seg_lo = np.full(r.shape, -np.inf)
    seg_hi = np.full(r.shape, np.inf)
    open_mask = np.ones(r.shape, dtype=bool)
    seg_idx = np.zeros(r.shape, dtype=np.intp)
    if bps.size:
        g_jump_lo = bps - a * f.left_limits   # g-interval edges at each jump
        g_jump_hi = bps - a * f.right_limits
        j = np.searchsorted(g_jump_hi, r)     # first jump with g_hi >= r
        jc = np.minimum(j, bps.size - 1)
        in_dead = (j < bps.size) & (r >= g_jump_lo[jc])
        out[in_dead] = bps[jc[in_dead]]
        open_mask = ~in_dead
        seg_idx = j  # root lies between breakpoints j-1 and j
        below = j > 0
        seg_lo[below] = bps[np.maximum(j - 1, 0)[below]]
        above = j < bps.size
        seg_hi[above] = bps[jc[above]]

    if not np.any(open_mask):
        return float(out[0]) if scalar_in else out

    if isinstance(f.continuous_part, StepsPart):
        # exact: g(s) = s - a*v on the segment, so J = r + a*v
        v = f.continuous_part.segment_values[seg_idx[open_mask]]
        out[open_mask] = r[open_mask] + a * v
        return float(out[0]) if scalar_in else out

    rr = r[open_mask]
    cont = f.continuous_part
    c3, m = f.growth
    width = a * (c3 * (1.0 + np.abs(rr) ** m) + 1.0)
    lo = np.maximum(rr - width, seg_lo[open_mask])
    hi = np.minimum(rr + width, seg_hi[open_mask])

    def g(s):
        return s - a * np.asarray(cont(s), dtype=float)

    # widen until g(lo) <= r <= g(hi) (stay inside the segment: at its ends
    # the jump dead zones already bracket the rest)
    for it in range(p.max_iter):
        bad_lo = g(lo) > rr
        bad_hi = g(hi) < rr
        if not (np.any(bad_lo) or np.any(bad_hi)):
            break
        grow = width * 2.0 ** (it + 1)
        lo = np.where(bad_lo, np.maximum(rr - grow, seg_lo[open_mask]), lo)
        hi = np.where(bad_hi, np.minimum(rr + grow, seg_hi[open_mask]), hi)
        if np.any(bad_lo & np.isinf(seg_lo[open_mask]) & (it > 60)) or \
           np.any(bad_hi & np.isinf(seg_hi[open_mask]) & (it > 60)):
            raise IterationLimit("resolvent bracket did not enclose the root; "
                                 "check the growth constants of the scalar map")
    else:
        raise IterationLimit("resolvent bracket did not enclose the root; "
                             "check the growth constants of the scalar map")

    for _ in range(p.max_iter):
        if not np.any(hi - lo > 0.25 * p.bisection_tol):
            break
        mid = 0.5 * (lo + hi)
        right = g(mid) < rr
        lo = np.where(right, mid, lo)
        hi = np.where(right, hi, mid)
    else:
        raise IterationLimit("resolvent bisection hit max_iter before reaching tol")
    out[open_mask] = 0.5 * (lo + hi)
    return float(out[0]) if scalar_in else out


def yosida_scalar(f: MultivaluedScalarMap, p: YosidaParams, r):
    """Yosida approximation F_a(r) = (J_a(r) - r)/a."""
    scalar_in = np.isscalar(r) or np.asarray(r).ndim == 0
    rr = np.atleast_1d(np.asarray(r, dtype=float))
    j = resolvent_scalar(f, p, rr)
    out = (j - rr) / p.alpha
    return float(out[0]) if scalar_in else out


class MinimalSectionMap:
    """Callable wrapper: the minimal section of a filled graph."""

    def __init__(self, f: MultivaluedScalarMap):
        self.f = f
        self.alpha = None  # not a Yosida regularization

    def __call__(self, s):
        return minimal_section(self.f, s)


class YosidaMap:
    """Callable wrapper: F_a of a filled graph, Lipschitz with constant 2/a."""

    def __init__(self, f: MultivaluedScalarMap, params: YosidaParams):
        self.f = f
        self.params = params
        self.alpha = params.alpha

    def __call__(self, s):
        shape = np.shape(s)
        flat = np.asarray(s, dtype=float).ravel()
        return yosida_scalar(self.f, self.params, flat).reshape(shape)


class SmoothedMap:
    """Fixed-node Monte Carlo approximation of the Gaussian smoothing.

    F_ab(x) = E[exp(bB) F_a(exp(bB) x + Y)] with Y drawn once from the
    smoothing Gaussian; shared antithetic nodes across all x keep the map
    deterministic and dissipative.
    """

    def __init__(self, F_alpha: Callable, sp: SmoothingParams):
        self.F_alpha = F_alpha
        self.sp = sp
        self.nodes = smoothing_nodes(sp)
        self.alpha = getattr(F_alpha, "alpha", None)

    def __call__(self, x):
        return smooth_yosida(self.F_alpha, self.sp, x, nodes=self.nodes)


def smooth_yosida(F_alpha: Callable, sp: SmoothingParams, x, nodes=None):
    """Average exp(bB) F_a(exp(bB)x + y_k) over the fixed node table."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != sp.dim:
        raise DimensionMismatch(
            f"x has dimension {x.shape[-1]}, smoothing expects {sp.dim}")
    if nodes is None:
        nodes = smoothing_nodes(sp)
    scale = sp.contraction()
    shifted = scale * x[..., None, :] + nodes  # (..., K, n)
    vals = np.asarray(F_alpha(shifted), dtype=float)
    return scale * vals.mean(axis=-2)


def growth_constant(F_ab: Callable, probe_points) -> float:
    """Empirical lower estimate of sup |F(x)|/(1+|x|) over the probe set."""
    probes = np.atleast_2d(np.asarray(probe_points, dtype=float))
    if probes.size == 0:
        raise ValueError("probe set must be nonempty")
    vals = np.asarray(F_ab(probes), dtype=float)
    norms = np.linalg.norm(vals, axis=-1)
    return float(np.max(norms / (1.0 + np.linalg.norm(probes, axis=-1))))


# ---------------------------------------------------------------------------
# declarative construction

_CONTINUOUS_REGISTRY = ("linear", "power_odd", "cubic", "table", "steps", "zero")


def scalar_map_from_spec(spec: dict) -> MultivaluedScalarMap:
    """Build a filled graph from a declarative description.

    spec = {
        "name": str,                      # optional label
        "continuous": {"name": "linear", "a": -1.0} | {"name": "power_odd", "m": 3}
                      | {"name": "cubic"} | {"name": "table", "xs": [...], "ys": [...]}
                      | {"name": "steps"} | {"name": "zero"},
        "breakpoints": [[s, left, right], ...],   # optional
        "growth": {"c3": float, "m": int},
    }
    """
    jumps = sorted(spec.get("breakpoints", []) or [], key=lambda row: row[0])
    bps = np.array([row[0] for row in jumps], dtype=float)
    lefts = np.array([row[1] for row in jumps], dtype=float)
    rights = np.array([row[2] for row in jumps], dtype=float)

    cont = spec.get("continuous", {"name": "zero"})
    kind = cont.get("name")
    if kind == "linear":
        part = LinearPart(cont["a"])
    elif kind == "power_odd":
        part = OddPowerPart(cont["m"])
    elif kind == "cubic":
        part = CubicPart()
    elif kind == "table":
        part = TablePart(cont["xs"], cont["ys"])
    elif kind == "steps":
        part = StepsPart(bps, lefts, rights)
    elif kind == "zero":
        part = ZeroPart()
    else:
        raise ValueError(f"unknown continuous part {kind!r}; "
                         f"registry: {_CONTINUOUS_REGISTRY}")

    growth = spec.get("growth", {"c3": 1.0, "m": 1})
    return MultivaluedScalarMap(
        breakpoints=bps,
        left_limits=lefts,
        right_limits=rights,
        continuous_part=part,
        growth=(float(growth["c3"]), int(growth["m"])),
        name=spec.get("name", "scalar_map"),
    )


def sign_map() -> MultivaluedScalarMap:
    """f(s) = -sign(s) with the filled jump [-1, 1] at 0."""
    return scalar_map_from_spec({
        "name": "neg_sign",
        "continuous": {"name": "steps"},
        "breakpoints": [[0.0, 1.0, -1.0]],
        "growth": {"c3": 1.0, "m": 1},
    })


def linear_map(a: float = -1.0) -> MultivaluedScalarMap:
    return scalar_map_from_spec({
        "name": f"linear[{a}]",
        "continuous": {"name": "linear", "a": a},
        "growth": {"c3": abs(a), "m": 1},
    })


def cubic_map() -> MultivaluedScalarMap:
    return scalar_map_from_spec({
        "name": "neg_cubic",
        "continuous": {"name": "cubic"},
        "growth": {"c3": 1.0, "m": 3},
    })


def staircase_map() -> MultivaluedScalarMap:
    """Two-jump staircase: 1 on (-inf,-1), 0 on (-1,1), -1 on (1,inf)."""
    return scalar_map_from_spec({
        "name": "staircase",
        "continuous": {"name": "steps"},
        "breakpoints": [[-1.0, 1.0, 0.0], [1.0, 0.0, -1.0]],
        "growth": {"c3": 1.0, "m": 1},
    })
