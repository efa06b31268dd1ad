"""Time discretization of the truncated evolution equation.

The default scheme is exponential Euler: per mode the linear flow and the
stochastic convolution are exact, the drift is frozen at the left endpoint,
so stiff eigenvalues like -pi^2 k^2 impose no step-size constraint.  An
Euler-Maruyama scheme is kept for cross-checks and non-diagonal diffusion.

Noise comes from the counter-based streams in rng.py, so any (stream, step)
cell is reproducible in isolation and batches of trajectories are bitwise
independent of batch size and worker count.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NonFiniteState
from .rng import normals_for_step, normals_for_step_block
from .spectral import SpectralModel

SCHEMES = ("exponential_euler", "euler_maruyama")


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_end: float
    scheme: str = "exponential_euler"
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.t_end < 0:
            raise ValueError("t_end must be >= 0")
        if self.t_end > 0 and self.dt > self.t_end + 1e-15:
            raise ValueError("dt must not exceed t_end")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")


@dataclass(frozen=True)
class PathRecord:
    """Discrete trajectory: states at grid times plus the standard normal
    draws that produced each step (retained for Girsanov reuse)."""

    times: np.ndarray
    states: np.ndarray
    noise_increments: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")
        if len(self.noise_increments) != max(len(self.times) - 1, 0):
            raise ValueError("need one noise vector per step")


def time_grid(t_end: float, dt: float) -> np.ndarray:
    """Uniform dt-grid on [0, t_end]; the final step may be shorter."""
    if t_end == 0:
        return np.array([0.0])
    n_full = int(np.floor(t_end / dt + 1e-9))
    times = np.arange(n_full + 1, dtype=float) * dt
    rem = t_end - n_full * dt
    if rem > 1e-12 * max(1.0, t_end):
        times = np.append(times, t_end)
    else:
        times[-1] = t_end
    return times


def stochastic_convolution_variance(a_k: float, sigma_k: float, dt: float):
    """Exact variance of the per-mode OU increment over one step.

    Var = sigma^2 (e^{2 a dt} - 1)/(2a), with the a -> 0 limit sigma^2 dt.
    Vectorized over a_k/sigma_k.
    """
    a = np.asarray(a_k, dtype=float)
    s2 = np.asarray(sigma_k, dtype=float) ** 2
    small = np.abs(a) * dt < 1e-12
    safe = np.where(small, 1.0, a)
    out = np.where(small, s2 * dt, s2 * np.expm1(2.0 * safe * dt) / (2.0 * safe))
    return float(out) if np.ndim(out) == 0 else out


def phi1(a_k, dt: float):
    """(e^{a dt} - 1)/a with the a -> 0 limit dt (drift multiplier)."""
    a = np.asarray(a_k, dtype=float)
    small = np.abs(a) * dt < 1e-12
    safe = np.where(small, 1.0, a)
    out = np.where(small, dt, np.expm1(safe * dt) / safe)
    return float(out) if np.ndim(out) == 0 else out


class StepCoeffs:
    """Per-dt constants of one scheme on one model."""

    def __init__(self, model: SpectralModel, scheme: str, dt: float):
        self.scheme = scheme
        self.dt = dt
        if scheme == "exponential_euler":
            if not model.sigma_is_diagonal:
                raise ValueError("exponential_euler requires sigma diagonal "
                                 "in the eigenbasis")
            self.decay = np.exp(model.a_eigs * dt)
            self.phi = phi1(model.a_eigs, dt)
            self.noise_scale = np.sqrt(
                stochastic_convolution_variance(model.a_eigs, model.sigma_diag, dt))
        elif scheme == "euler_maruyama":
            self.sqrt_dt_sigma = np.sqrt(dt) * model.sigma
            self.a = model.a_eigs
        else:
            raise ValueError(f"unknown scheme {scheme!r}")

    def apply(self, model: SpectralModel, x: np.ndarray, noise: np.ndarray,
              extra_drift=None) -> np.ndarray:
        """One step from x (shape (..., n)) with standard normal noise."""
        drift = np.asarray(model.drift(x), dtype=float)
        if extra_drift is not None:
            drift = drift + extra_drift
        with np.errstate(invalid="ignore", over="ignore"):
            # non-finite inputs propagate and are rejected by the caller
            if self.scheme == "exponential_euler":
                return self.decay * x + self.phi * drift + self.noise_scale * noise
            return x + self.dt * (self.a * x + drift) + noise @ self.sqrt_dt_sigma.T


def step(model: SpectralModel, cfg: IntegratorConfig, x, noise, *,
         dt: Optional[float] = None) -> np.ndarray:
    """Single integration step (the noise is a standard normal vector)."""
    x = np.asarray(x, dtype=float)
    noise = np.asarray(noise, dtype=float)
    coeffs = StepCoeffs(model, cfg.scheme, cfg.dt if dt is None else dt)
    out = coeffs.apply(model, x, noise)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("integration step produced a non-finite state; "
                             "reduce dt relative to the drift growth")
    return out


def simulate(model: SpectralModel, cfg: IntegratorConfig, x0) -> PathRecord:
    """Integrate to t_end on the dt-grid, one trajectory.

    Noise for step k is normals_for_step(seed, stream_id, k, n), so the
    record is a pure function of (model, cfg, x0).
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.n,):
        raise ValueError(f"x0 must have shape ({model.n},)")
    if not np.all(np.isfinite(x0)):
        raise NonFiniteState("x0 is not finite")
    times = time_grid(cfg.t_end, cfg.dt)
    n_steps = len(times) - 1
    states = np.empty((n_steps + 1, model.n))
    noises = np.empty((n_steps, model.n))
    states[0] = x0
    coeffs = StepCoeffs(model, cfg.scheme, cfg.dt) if n_steps else None
    for k in range(n_steps):
        h = times[k + 1] - times[k]
        ck = coeffs if abs(h - cfg.dt) <= 1e-9 * cfg.dt else StepCoeffs(model, cfg.scheme, h)
        z = normals_for_step(cfg.seed, cfg.stream_id, k, model.n)
        noises[k] = z
        nxt = ck.apply(model, states[k], z)
        if not np.all(np.isfinite(nxt)):
            raise NonFiniteState(f"non-finite state at step {k}", step=k)
        states[k + 1] = nxt
    return PathRecord(times=times, states=states, noise_increments=noises)


def simulate_batch_final(model: SpectralModel, cfg: IntegratorConfig, x0,
                         n_paths: int, stream_lo: int = 0) -> np.ndarray:
    """Final states X(t_end) of n_paths independent trajectories from x0.

    Trajectory i uses stream stream_lo + i; row i is bitwise identical to
    simulate() with that stream_id.
    """
    x0 = np.asarray(x0, dtype=float)
    times = time_grid(cfg.t_end, cfg.dt)
    states = np.broadcast_to(x0, (n_paths, model.n)).copy()
    if len(times) == 1:
        return states
    coeffs = StepCoeffs(model, cfg.scheme, cfg.dt)
    for k in range(len(times) - 1):
        h = times[k + 1] - times[k]
        ck = coeffs if abs(h - cfg.dt) <= 1e-9 * cfg.dt else StepCoeffs(model, cfg.scheme, h)
        z = normals_for_step_block(cfg.seed, stream_lo, n_paths, k, model.n)
        states = ck.apply(model, states, z)
        if not np.all(np.isfinite(states)):
            raise NonFiniteState(f"non-finite state at step {k}", step=k)
    return states


# ---------------------------------------------------------------------------
# path export

BINARY_MAGIC = b"DSDEPATH"
BINARY_VERSION = 1


def path_to_csv(record: PathRecord, path) -> None:
    """Columnar CSV: time, mode_1 .. mode_n, 17 significant digits."""
    n = record.states.shape[1]
    header = "time," + ",".join(f"mode_{k+1}" for k in range(n))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for t, row in zip(record.times, record.states):
            cells = [f"{t:.17g}"] + [f"{v:.17g}" for v in row]
            fh.write(",".join(cells) + "\n")


def path_to_binary(record: PathRecord, path) -> None:
    """Compact dump, little-endian:

    8-byte magic 'DSDEPATH', uint32 version, uint32 n, uint64 n_rows,
    then n_rows rows of (1+n) float64: time followed by the mode values.
    """
    n = record.states.shape[1]
    rows = np.column_stack([record.times, record.states]).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<IIQ", BINARY_VERSION, n, rows.shape[0]))
        fh.write(rows.tobytes(order="C"))


def read_binary_path(path) -> PathRecord:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != BINARY_MAGIC:
            raise ValueError("not a path dump")
        version, n, n_rows = struct.unpack("<IIQ", fh.read(16))
        if version != BINARY_VERSION:
            raise ValueError(f"unsupported dump version {version}")
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(n_rows, 1 + n)
    return PathRecord(times=data[:, 0].copy(), states=data[:, 1:].copy(),
                      noise_increments=np.zeros((max(n_rows - 1, 0), n)))
