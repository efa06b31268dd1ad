"""Shared-noise coupling of two trajectories and the Girsanov weight.

Both copies are driven by the same Brownian increments; the second copy
gets the deterministic steering drift

    xi(t) * (X - Y)/|X - Y|,   xi(t) = 2 w e^{-w t} |x-y|_0 / (1 - e^{-2 w T}),

which forces the distance to zero by the horizon T.  Exact hitting has
probability zero under discretization, so the pair is glued once the
distance falls below glue_tol.  The steering displacement per step is
clamped to the current distance: the continuous dynamics cannot cross zero
distance, the discrete one can.

The accumulated log-weight uses the noise draw mapped back to an effective
Brownian increment sqrt(dt)*z (an O(dt) identification for the exponential
scheme, exact for Euler-Maruyama) and the clamped steering coefficient that
was actually applied, which keeps E[exp(log R)] = 1 exactly in expectation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NonFiniteState
from .rng import normals_for_step, normals_for_step_block
from .sde import IntegratorConfig, PathRecord, StepCoeffs, time_grid
from .spectral import SpectralModel


@dataclass(frozen=True)
class CouplingConfig(IntegratorConfig):
    """Integrator settings plus the coupling horizon T (= t_end), the
    moment exponent p and the numerical gluing threshold."""

    p: float = 2.0
    glue_tol: Optional[float] = None

    def __post_init__(self):
        super().__post_init__()
        if self.p <= 1:
            raise ValueError("p must be > 1")
        if self.glue_tol is not None and self.glue_tol <= 0:
            raise ValueError("glue_tol must be > 0")

    @property
    def T(self) -> float:
        return self.t_end

    def resolved_glue_tol(self, dist0: float) -> float:
        return self.glue_tol if self.glue_tol is not None else 1e-4 * dist0


@dataclass(frozen=True)
class CoupledPathRecord:
    x_path: PathRecord
    y_path: PathRecord
    tau: float
    log_R: float
    contraction_series: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.log_R):
            raise ValueError("log_R must be finite")


@dataclass(frozen=True)
class CoupledBatchResult:
    """Per-path outputs of a coupled batch (index = stream id offset)."""

    tau: np.ndarray
    log_r: np.ndarray
    max_contraction_increase: np.ndarray
    local_drift_bound: np.ndarray
    post_tau_identical: np.ndarray
    final_x: np.ndarray
    final_y: np.ndarray

    @property
    def coupled_fraction(self) -> float:
        return float(np.mean(np.isfinite(self.tau)))


def omega_time_ratio(omega: float, t: float):
    """omega / (1 - e^{-2 omega t}) with the omega -> 0 limit 1/(2t).

    Numerator and denominator share their sign, so the ratio is positive
    for every omega != 0.
    """
    if abs(omega) < 1e-12:
        return 1.0 / (2.0 * t)
    return omega / (-np.expm1(-2.0 * omega * t))


def xi_schedule(omega: float, T: float, dist0, t):
    """Steering schedule 2 w e^{-w t} |x-y|_0 / (1 - e^{-2 w T})."""
    if T <= 0:
        raise ValueError("T must be > 0")
    return 2.0 * np.asarray(dist0, dtype=float) * np.exp(-omega * np.asarray(t, dtype=float)) \
        * omega_time_ratio(omega, T)


def girsanov_moment_bound(sigma_inv_norm: float, p: float, omega: float,
                          T: float, dist0: float) -> float:
    """Analytic upper bound for (E[R^{p/(p-1)}])^{p-1}.

    exp[ |sigma^{-1}|^2 p w d0^2 / ((p-1)(1-e^{-2wT})) ]; the w -> 0 limit
    replaces w/(1-e^{-2wT}) by 1/(2T).  Coincides with the Harnack factor
    at horizon T, which is exactly the combination it enters.
    """
    if p <= 1:
        raise ValueError("p must be > 1")
    exponent = sigma_inv_norm**2 * p * dist0**2 * omega_time_ratio(omega, T) / (p - 1.0)
    return float(np.exp(exponent))


# ---------------------------------------------------------------------------
# stepping core (operates on (N, n) blocks)

class _PairStepper:
    def __init__(self, model: SpectralModel, cfg: CouplingConfig, dist0: float):
        self.model = model
        self.cfg = cfg
        self.dist0 = float(dist0)
        self.glue_tol = cfg.resolved_glue_tol(self.dist0)
        self.coeffs = StepCoeffs(model, cfg.scheme, cfg.dt)
        self.sigma_inv = np.linalg.inv(model.sigma)  # symmetric, factor once

    def _coeffs_for(self, h: float) -> StepCoeffs:
        if abs(h - self.cfg.dt) <= 1e-9 * self.cfg.dt:
            return self.coeffs
        return StepCoeffs(self.model, self.cfg.scheme, h)

    def advance(self, X, Y, glued, t, h, noise):
        """One step of the coupled pair; returns
        (X', Y', glued', dlogR, drift_norm_bound)."""
        model, cfg = self.model, self.cfg
        ck = self._coeffs_for(h)

        diff = X - Y
        dist = np.linalg.norm(diff, axis=-1)
        active = ~glued & (dist > self.glue_tol)

        fx = np.asarray(model.drift(X), dtype=float)
        fy = np.asarray(model.drift(Y), dtype=float)
        drift_norm = np.maximum(np.linalg.norm(fx, axis=-1),
                                np.linalg.norm(fy, axis=-1))

        dlog_r = np.zeros(X.shape[0])
        extra = np.zeros_like(Y)
        if np.any(active):
            d = np.where(active, dist, 1.0)
            u = diff / d[:, None]
            xi = xi_schedule(model.omega, cfg.T, self.dist0, t)
            if ck.scheme == "exponential_euler":
                disp_unit = np.linalg.norm(ck.phi * u, axis=-1)
            else:
                disp_unit = np.full(X.shape[0], h)
            with np.errstate(divide="ignore", invalid="ignore"):
                xi_cap = dist / disp_unit
            xi_eff = np.where(active, np.minimum(xi, xi_cap), 0.0)
            extra = xi_eff[:, None] * u * active[:, None]

            # log-weight increment of the applied steering drift
            siginv_u = u @ self.sigma_inv
            theta = xi_eff[:, None] * siginv_u  # sigma^{-1} drift direction
            dW = np.sqrt(h) * noise
            dlog_r = np.where(
                active,
                -np.einsum("ij,ij->i", theta, dW)
                - 0.5 * np.einsum("ij,ij->i", theta, theta) * h,
                0.0,
            )

        Xn = self._apply(ck, X, fx, noise, None)
        Yn = self._apply(ck, Y, fy, noise, extra)

        new_dist = np.linalg.norm(Xn - Yn, axis=-1)
        glue_now = ~glued & (new_dist <= self.glue_tol)
        copy_rows = glued | glue_now
        Yn[copy_rows] = Xn[copy_rows]
        if not np.all(np.isfinite(Xn)) or not np.all(np.isfinite(Yn)):
            raise NonFiniteState("non-finite state in coupled step")
        return Xn, Yn, glued | glue_now, dlog_r, drift_norm

    @staticmethod
    def _apply(ck: StepCoeffs, x, drift, noise, extra):
        total = drift if extra is None else drift + extra
        if ck.scheme == "exponential_euler":
            return ck.decay * x + ck.phi * total + ck.noise_scale * noise
        return x + ck.dt * (ck.a * x + total) + noise @ ck.sqrt_dt_sigma.T


def coupled_step(model: SpectralModel, cfg: CouplingConfig, x, y, t, noise,
                 dist0: Optional[float] = None):
    """One step of the pair; returns (x', y', glued).

    dist0 fixes the steering schedule; it defaults to the current distance
    (simulate_coupled always passes the initial one).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if dist0 is None:
        dist0 = float(np.linalg.norm(x - y))
    stepper = _PairStepper(model, cfg, dist0)
    X, Y, glued, _, _ = stepper.advance(
        x[None, :], y[None, :], np.zeros(1, dtype=bool), t, cfg.dt,
        np.asarray(noise, dtype=float)[None, :])
    return X[0], Y[0], bool(glued[0])


def girsanov_increment(model: SpectralModel, cfg: CouplingConfig, x, y, t,
                       noise, dt: float, dist0: Optional[float] = None) -> float:
    """Log-weight increment of one coupled step.

    -(xi/|x-y|) <x-y, sigma^{-1} sqrt(dt) z> - (xi^2/2)|sigma^{-1}(x-y)|^2/|x-y|^2 dt
    with the same clamped xi the stepper applies.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if dist0 is None:
        dist0 = float(np.linalg.norm(x - y))
    stepper = _PairStepper(model, cfg, dist0)
    _, _, _, dlog_r, _ = stepper.advance(
        x[None, :], y[None, :], np.zeros(1, dtype=bool), t, dt,
        np.asarray(noise, dtype=float)[None, :])
    return float(dlog_r[0])


def simulate_coupled(model: SpectralModel, cfg: CouplingConfig, x0, y0) -> CoupledPathRecord:
    """Coupled pair with full trajectories, coupling time and log-weight."""
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    dist0 = float(np.linalg.norm(x0 - y0))
    stepper = _PairStepper(model, cfg, dist0)
    times = time_grid(cfg.t_end, cfg.dt)
    n_steps = len(times) - 1

    X = x0[None, :].copy()
    Y = y0[None, :].copy()
    glued = np.array([dist0 <= stepper.glue_tol])
    tau = 0.0 if glued[0] else np.inf
    log_r = 0.0
    xs = np.empty((n_steps + 1, model.n))
    ys = np.empty((n_steps + 1, model.n))
    noises = np.empty((n_steps, model.n))
    xs[0], ys[0] = x0, y0
    contraction = np.empty(n_steps + 1)
    contraction[0] = dist0

    for k in range(n_steps):
        h = times[k + 1] - times[k]
        z = normals_for_step(cfg.seed, cfg.stream_id, k, model.n)
        noises[k] = z
        was_glued = glued[0]
        X, Y, glued, dlog, _ = stepper.advance(X, Y, glued, times[k], h, z[None, :])
        log_r += float(dlog[0])
        if glued[0] and not was_glued:
            tau = times[k + 1]
        xs[k + 1], ys[k + 1] = X[0], Y[0]
        contraction[k + 1] = np.exp(-model.omega * times[k + 1]) \
            * np.linalg.norm(X[0] - Y[0])

    x_path = PathRecord(times=times, states=xs, noise_increments=noises)
    y_path = PathRecord(times=times, states=ys, noise_increments=noises)
    return CoupledPathRecord(x_path=x_path, y_path=y_path, tau=tau,
                             log_R=log_r, contraction_series=contraction)


def simulate_coupled_batch(model: SpectralModel, cfg: CouplingConfig, x0, y0,
                           n_paths: int, stream_lo: int = 0) -> CoupledBatchResult:
    """n_paths coupled pairs; pair i uses stream stream_lo + i.

    Tracks, per path: coupling time, accumulated log-weight, the largest
    one-step increase of e^{-w t}|X-Y| (the discrete contraction slack),
    the largest drift norm seen, and whether the paths stayed bitwise
    identical after gluing.
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    dist0 = float(np.linalg.norm(x0 - y0))
    stepper = _PairStepper(model, cfg, dist0)
    times = time_grid(cfg.t_end, cfg.dt)
    n_steps = len(times) - 1

    X = np.broadcast_to(x0, (n_paths, model.n)).copy()
    Y = np.broadcast_to(y0, (n_paths, model.n)).copy()
    glued = np.full(n_paths, dist0 <= stepper.glue_tol)
    tau = np.where(glued, 0.0, np.inf)
    log_r = np.zeros(n_paths)
    contraction = np.full(n_paths, dist0)
    max_increase = np.full(n_paths, -np.inf)
    drift_bound = np.zeros(n_paths)
    post_tau_ok = np.ones(n_paths, dtype=bool)

    for k in range(n_steps):
        h = times[k + 1] - times[k]
        z = normals_for_step_block(cfg.seed, stream_lo, n_paths, k, model.n)
        was_glued = glued.copy()
        X, Y, glued, dlog, dnorm = stepper.advance(X, Y, glued, times[k], h, z)
        log_r += dlog
        drift_bound = np.maximum(drift_bound, dnorm)
        newly = glued & ~was_glued
        tau[newly] = times[k + 1]
        post_tau_ok &= ~was_glued | np.all(X == Y, axis=-1)
        new_contraction = np.exp(-model.omega * times[k + 1]) \
            * np.linalg.norm(X - Y, axis=-1)
        max_increase = np.maximum(max_increase, new_contraction - contraction)
        contraction = new_contraction

    return CoupledBatchResult(
        tau=tau, log_r=log_r, max_contraction_increase=max_increase,
        local_drift_bound=drift_bound, post_tau_identical=post_tau_ok,
        final_x=X, final_y=Y)
