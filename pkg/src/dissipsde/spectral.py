"""Finite-dimensional model assembly.

Truncates the evolution equation to the span of the first n eigenfunctions
of the linear part.  For the Dirichlet Laplacian on (0,1) the basis is
e_k(xi) = sqrt(2) sin(k pi xi) with eigenvalues -pi^2 k^2, and a scalar
drift f acts pointwise through a quadrature-based coefficient lift.
Also houses the weighted quadratic functional Theta and the L^{2m}-norm
functional G used for moment diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, InfeasibleQ, InvalidSigma
from .monotone import (
    MinimalSectionMap,
    MultivaluedScalarMap,
    SmoothedMap,
    SmoothingParams,
    YosidaMap,
    YosidaParams,
    default_b_coeffs,
    scalar_map_from_spec,
)


# ---------------------------------------------------------------------------
# drift fields

class ZeroDrift:
    alpha = None

    def __call__(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


class LinearDrift:
    """F(x) = coeff * x, per-mode or scalar coeff; dissipative for coeff <= 0."""

    alpha = None

    def __init__(self, coeff):
        self.coeff = np.asarray(coeff, dtype=float)

    def __call__(self, x):
        return self.coeff * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class NemytskiiLift:
    """Coefficient-space lift of a pointwise scalar map on (0,1).

    Reconstructs x(xi_j) on a uniform (M+1)-point grid (endpoints included,
    where the sine basis vanishes), applies the scalar map pointwise and
    projects back with trapezoid weights.  M >= 2n keeps the harmonics
    generated by the nonlinearity below the aliasing floor.
    """

    scalar_fn: Callable
    n: int
    grid_size: int

    def __post_init__(self):
        if self.grid_size < 2 * self.n:
            raise ValueError("grid_size must be at least 2n (anti-aliasing floor)")

    @property
    def xi(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_size + 1)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.grid_size + 1, 1.0 / self.grid_size)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    @property
    def basis(self) -> np.ndarray:
        """(n, M+1) table of e_k(xi_j) = sqrt(2) sin(k pi xi_j)."""
        k = np.arange(1, self.n + 1)[:, None]
        return np.sqrt(2.0) * np.sin(k * np.pi * self.xi[None, :])

    def values_on_grid(self, coeffs) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1] != self.n:
            raise DimensionMismatch(
                f"coefficient vector has length {coeffs.shape[-1]}, expected {self.n}")
        return coeffs @ self.basis

    def project(self, values) -> np.ndarray:
        return np.asarray(values, dtype=float) @ (self.weights[:, None] * self.basis.T)

    def __call__(self, coeffs) -> np.ndarray:
        return self.project(self.scalar_fn(self.values_on_grid(coeffs)))


class NemytskiiDrift:
    """Drift field given by a NemytskiiLift; alpha is exposed for the
    dt <= alpha/4 step-size rule when the scalar map is a Yosida map."""

    def __init__(self, lift: NemytskiiLift):
        self.lift = lift
        self.alpha = getattr(lift.scalar_fn, "alpha", None)

    def __call__(self, x):
        return self.lift(x)


def lift_drift(L: NemytskiiLift, coeffs) -> np.ndarray:
    """Coefficient vector of f(x(.)) for x given by sine coefficients."""
    return L(coeffs)


def g_functional(L: NemytskiiLift, coeffs=None, m: int = 1, grid_values=None) -> float:
    """(integral of |x(xi)|^{2m})^{1/2} by the M-point trapezoid rule.

    Pass grid_values to evaluate a function supplied directly on the grid
    (e.g. constants outside the sine span).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if grid_values is None:
        grid_values = L.values_on_grid(coeffs)
    vals = np.abs(np.asarray(grid_values, dtype=float)) ** (2 * m)
    return float(np.sqrt(vals @ L.weights))


# ---------------------------------------------------------------------------
# Theta functional

@dataclass(frozen=True)
class ThetaFunctional:
    """Theta(x) = sum_i (lambda_i/q_i) <x, e_i>^2 with 0 < q_i < lambda_i."""

    lambda_eigs: np.ndarray
    q_coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lambda_eigs", np.asarray(self.lambda_eigs, dtype=float))
        object.__setattr__(self, "q_coeffs", np.asarray(self.q_coeffs, dtype=float))
        lam, q = self.lambda_eigs, self.q_coeffs
        if lam.shape != q.shape:
            raise DimensionMismatch("lambda_eigs and q_coeffs must have equal length")
        if np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
            raise ValueError("lambda_eigs must be positive and increasing")
        if np.any(q <= 0) or np.any(q >= lam):
            raise ValueError("q_i must lie in (0, lambda_i)")
        if np.any(np.diff(q) <= 0):
            raise ValueError("q_i must be increasing")
        ratio = q / lam
        if np.any(np.diff(ratio) > 1e-12):
            raise ValueError("q_i/lambda_i must be decreasing across the truncation")

    def weights(self) -> np.ndarray:
        return self.lambda_eigs / self.q_coeffs


def theta_value(T: ThetaFunctional, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != T.lambda_eigs.size:
        raise DimensionMismatch("state dimension does not match Theta truncation")
    val = (x * x) @ T.weights()
    return float(val) if np.ndim(val) == 0 else val


def default_q(lambda_eigs, eps: float = 1e-6) -> np.ndarray:
    """q_i = i^{3/2}, clipped into (eps, lambda_i - eps).

    Raises InfeasibleQ when lambda_i <= i^{3/2} somewhere in the truncation;
    the caller must then supply q explicitly.
    """
    lam = np.asarray(lambda_eigs, dtype=float)
    i = np.arange(1, lam.size + 1, dtype=float)
    q = i**1.5
    if np.any(lam <= q):
        bad = int(np.argmax(lam <= q)) + 1
        raise InfeasibleQ(
            f"lambda_{bad} <= {bad}^(3/2): spectrum grows too slowly for the "
            "default rule; supply q_coeffs explicitly")
    q = np.clip(q, eps, lam - eps)
    ThetaFunctional(lam, q)  # fails loudly if any required property is violated
    return q


# ---------------------------------------------------------------------------
# spectral model

@dataclass(frozen=True)
class SpectralModel:
    """Eigenbasis truncation of the evolution equation.

    a_eigs are the eigenvalues of the linear part (a_k <= omega), sigma the
    n x n diffusion matrix, sigma_inv_norm the operator norm of sigma^{-1}
    on the full space (supplied; defaults to the finite-dimensional value),
    drift a dissipative vector field on R^n.
    """

    n: int
    a_eigs: np.ndarray
    omega: float
    sigma: np.ndarray
    sigma_inv_norm: float
    drift: Callable
    theta: Optional[ThetaFunctional] = None
    lift: Optional[NemytskiiLift] = None
    name: str = "model"

    def __post_init__(self):
        object.__setattr__(self, "a_eigs", np.asarray(self.a_eigs, dtype=float))
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float))
        if self.a_eigs.shape != (self.n,):
            raise DimensionMismatch("a_eigs must have length n")
        if np.any(self.a_eigs > self.omega + 1e-12):
            raise ValueError("every a_k must satisfy a_k <= omega")
        if self.sigma.shape != (self.n, self.n):
            raise InvalidSigma("sigma must be an n x n matrix")
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-12):
            raise InvalidSigma("sigma must be symmetric")
        if np.min(np.linalg.eigvalsh(self.sigma)) <= 0:
            raise InvalidSigma("sigma must be positive definite")

    @property
    def sigma_is_diagonal(self) -> bool:
        return bool(np.allclose(self.sigma, np.diag(np.diag(self.sigma)), atol=0.0))

    @property
    def sigma_diag(self) -> np.ndarray:
        return np.diag(self.sigma)

    @property
    def drift_alpha(self):
        """Yosida parameter of the drift, if any (drives the dt rule)."""
        return getattr(self.drift, "alpha", None)

    def sigma_solve(self, v):
        """sigma^{-1} v for v of shape (..., n)."""
        from .errors import SingularSigma
        v = np.asarray(v, dtype=float)
        try:
            return np.linalg.solve(self.sigma, v[..., :, None])[..., 0] \
                if v.ndim > 1 else np.linalg.solve(self.sigma, v)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise SingularSigma(str(exc)) from exc


def sigma_from_spec(n: int, sigma_spec) -> np.ndarray:
    """Scalar multiple of identity, diagonal, or dense SPD matrix."""
    if sigma_spec is None:
        return np.eye(n)
    if np.isscalar(sigma_spec):
        if sigma_spec <= 0:
            raise InvalidSigma("scalar sigma must be > 0")
        return float(sigma_spec) * np.eye(n)
    arr = np.asarray(sigma_spec, dtype=float)
    if arr.ndim == 1:
        if arr.size != n or np.any(arr <= 0):
            raise InvalidSigma("diagonal sigma needs n positive entries")
        return np.diag(arr)
    if arr.shape != (n, n):
        raise InvalidSigma("dense sigma must be n x n")
    if not np.allclose(arr, arr.T, atol=1e-12):
        raise InvalidSigma("dense sigma must be symmetric")
    if np.min(np.linalg.eigvalsh(arr)) <= 0:
        raise InvalidSigma("dense sigma must be positive definite")
    return arr


def drift_from_scalar_map(
    f: MultivaluedScalarMap,
    n: int,
    mode: str = "yosida",
    alpha: float = 1e-2,
    grid_size: Optional[int] = None,
    oversampling: int = 8,
    smoothing: Optional[SmoothingParams] = None,
) -> NemytskiiDrift:
    """Nemytskii lift of a regularized scalar map.

    mode 'yosida' composes with F_alpha (Lipschitz, used in simulation);
    mode 'minimal_section' composes with the minimal section F_0.
    Optional Gaussian smoothing wraps the lifted Yosida field.
    """
    if grid_size is None:
        grid_size = max(2 * n, oversampling * n)
    if mode == "yosida":
        scalar = YosidaMap(f, YosidaParams(alpha=alpha))
    elif mode == "minimal_section":
        scalar = MinimalSectionMap(f)
    else:
        raise ValueError("regularization mode must be 'yosida' or 'minimal_section'")
    lift = NemytskiiLift(scalar_fn=scalar, n=n, grid_size=grid_size)
    drift = NemytskiiDrift(lift)
    if smoothing is not None:
        smoothed = SmoothedMap(drift, smoothing)
        smoothed.lift = lift
        return smoothed
    return drift


def dirichlet_eigenvalues(n: int) -> np.ndarray:
    k = np.arange(1, n + 1, dtype=float)
    return -np.pi**2 * k**2


def build_dirichlet_model(
    n: int,
    f=None,
    sigma_spec=None,
    *,
    regularization: str = "yosida",
    alpha: float = 1e-2,
    oversampling: int = 8,
    smoothing_beta: Optional[float] = None,
    smoothing_nodes: int = 32,
    smoothing_seed: int = 0,
    q_coeffs=None,
    sigma_inv_norm: Optional[float] = None,
    name: str = "dirichlet",
) -> SpectralModel:
    """Dirichlet Laplacian on (0,1) with a pointwise scalar drift.

    f may be a MultivaluedScalarMap, a declarative dict, or None (zero
    drift).  The Theta functional uses lambda_i = 1 + omega - a_i; for this
    spectrum lambda_1 = 1, which makes the default q rule infeasible, so a
    q override (array or scale factor for i^{3/2}) is accepted.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    a = dirichlet_eigenvalues(n)
    omega = -np.pi**2
    sigma = sigma_from_spec(n, sigma_spec)

    if f is None:
        drift = ZeroDrift()
        lift = None
    else:
        if isinstance(f, dict):
            f = scalar_map_from_spec(f)
        smoothing = None
        if smoothing_beta is not None:
            smoothing = SmoothingParams(
                beta=smoothing_beta,
                b_coeffs=default_b_coeffs(n),
                node_count=smoothing_nodes,
                node_seed=smoothing_seed,
            )
        drift = drift_from_scalar_map(
            f, n, mode=regularization, alpha=alpha,
            oversampling=oversampling, smoothing=smoothing)
        lift = drift.lift

    lam = 1.0 + omega - a
    if q_coeffs is None:
        q = None
        try:
            q = default_q(lam)
        except InfeasibleQ:
            pass  # lambda_1 = 1 exactly; caller may still use Theta via override
    elif np.isscalar(q_coeffs):
        q = float(q_coeffs) * np.arange(1, n + 1, dtype=float) ** 1.5
    else:
        q = np.asarray(q_coeffs, dtype=float)
    theta = ThetaFunctional(lam, q) if q is not None else None

    if sigma_inv_norm is None:
        sigma_inv_norm = 1.0 / float(np.min(np.linalg.eigvalsh(sigma)))
    return SpectralModel(
        n=n, a_eigs=a, omega=omega, sigma=sigma,
        sigma_inv_norm=float(sigma_inv_norm), drift=drift,
        theta=theta, lift=lift, name=name)


def build_diagonal_model(
    a_eigs,
    sigma_spec=None,
    *,
    omega: Optional[float] = None,
    drift: Optional[Callable] = None,
    sigma_inv_norm: Optional[float] = None,
    q_coeffs=None,
    name: str = "diagonal",
) -> SpectralModel:
    """Generic diagonal linear part (e.g. one-mode OU with a = omega)."""
    a = np.asarray(a_eigs, dtype=float)
    n = a.size
    if omega is None:
        omega = float(np.max(a))
    sigma = sigma_from_spec(n, sigma_spec)
    if sigma_inv_norm is None:
        sigma_inv_norm = 1.0 / float(np.min(np.linalg.eigvalsh(sigma)))
    theta = None
    lam = 1.0 + omega - a
    order = np.argsort(lam)
    if np.all(lam > 0) and np.all(np.diff(lam[order]) > 0) and np.array_equal(order, np.arange(n)):
        if q_coeffs is not None:
            q = np.asarray(q_coeffs, dtype=float)
            theta = ThetaFunctional(lam, q)
        else:
            try:
                theta = ThetaFunctional(lam, default_q(lam))
            except InfeasibleQ:
                theta = None
    return SpectralModel(
        n=n, a_eigs=a, omega=float(omega), sigma=sigma,
        sigma_inv_norm=float(sigma_inv_norm),
        drift=drift if drift is not None else ZeroDrift(),
        theta=theta, lift=None, name=name)


# ---------------------------------------------------------------------------
# empirical checks used by the verification suites

def dissipativity_gap(drift: Callable, pairs_x, pairs_y) -> float:
    """max over sampled pairs of <F(x)-F(y), x-y>; <= 0 for dissipative F."""
    fx = np.asarray(drift(pairs_x), dtype=float)
    fy = np.asarray(drift(pairs_y), dtype=float)
    return float(np.max(np.sum((fx - fy) * (pairs_x - pairs_y), axis=-1)))


def growth_constant_518(model: SpectralModel, samples, m: int) -> float:
    """Empirical C with |F(x)| <= C(1+|x|^m+Theta^{1/2}(x)) on the samples."""
    if model.theta is None:
        raise ValueError("model carries no Theta functional")
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    fx = np.linalg.norm(np.asarray(model.drift(x), dtype=float), axis=-1)
    denom = 1.0 + np.linalg.norm(x, axis=-1) ** m + np.sqrt(theta_value(model.theta, x))
    return float(np.max(fx / denom))
