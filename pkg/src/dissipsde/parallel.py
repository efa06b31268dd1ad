"""Worker-pool batching over trajectory streams.

Chunks are contiguous stream ranges and results are merged in chunk order,
so every quantity is bitwise independent of the worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .coupling import CoupledBatchResult, CouplingConfig, simulate_coupled_batch
from .sde import IntegratorConfig, simulate_batch_final
from .spectral import SpectralModel


def _chunks(n_paths: int, stream_lo: int, workers: int):
    per = -(-n_paths // workers)
    out = []
    start = 0
    while start < n_paths:
        count = min(per, n_paths - start)
        out.append((stream_lo + start, count))
        start += count
    return out


def _finals_task(args):
    model, cfg, x0, count, lo = args
    return simulate_batch_final(model, cfg, x0, count, stream_lo=lo)


def batched_finals(model: SpectralModel, cfg: IntegratorConfig, x0,
                   n_paths: int, stream_lo: int = 0, workers: int = 1) -> np.ndarray:
    if workers <= 1 or n_paths < 2 * workers:
        return simulate_batch_final(model, cfg, x0, n_paths, stream_lo=stream_lo)
    tasks = [(model, cfg, x0, count, lo)
             for lo, count in _chunks(n_paths, stream_lo, workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_finals_task, tasks))
    return np.concatenate(parts, axis=0)


def _coupled_task(args):
    model, cfg, x0, y0, count, lo = args
    return simulate_coupled_batch(model, cfg, x0, y0, count, stream_lo=lo)


def batched_coupled(model: SpectralModel, cfg: CouplingConfig, x0, y0,
                    n_paths: int, stream_lo: int = 0,
                    workers: int = 1) -> CoupledBatchResult:
    if workers <= 1 or n_paths < 2 * workers:
        return simulate_coupled_batch(model, cfg, x0, y0, n_paths,
                                      stream_lo=stream_lo)
    tasks = [(model, cfg, x0, y0, count, lo)
             for lo, count in _chunks(n_paths, stream_lo, workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_coupled_task, tasks))
    return CoupledBatchResult(
        tau=np.concatenate([p.tau for p in parts]),
        log_r=np.concatenate([p.log_r for p in parts]),
        max_contraction_increase=np.concatenate(
            [p.max_contraction_increase for p in parts]),
        local_drift_bound=np.concatenate([p.local_drift_bound for p in parts]),
        post_tau_identical=np.concatenate([p.post_tau_identical for p in parts]),
        final_x=np.concatenate([p.final_x for p in parts], axis=0),
        final_y=np.concatenate([p.final_y for p in parts], axis=0),
    )
