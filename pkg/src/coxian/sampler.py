"""Exact simulation of Coxian absorption times."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import CoxianParams

DEFAULT_CHUNK = 1 << 16
_2_53 = float(2**53)


@dataclass(frozen=True)
class PathRecord:
    sojourns: np.ndarray
    exit_phase: int  # 1-based
    total: float


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based stream ``index`` of ``seed``; streams are independent."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def open_uniform(rng: np.random.Generator, size=None):
    """Uniform draws on the open interval (0, 1)."""
    k = rng.integers(0, 2**53, size=size, dtype=np.int64)
    return (k + 0.5) / _2_53


def sample_path(p: CoxianParams, rng: np.random.Generator) -> PathRecord:
    lam = np.append(p.lam, 0.0)
    total_rate = lam + p.mu
    sojourns = []
    for k in range(p.n):
        sojourns.append(-np.log(open_uniform(rng)) / total_rate[k])
        if k == p.n - 1 or open_uniform(rng) * total_rate[k] < p.mu[k]:
            break
    arr = np.array(sojourns)
    return PathRecord(sojourns=arr, exit_phase=arr.size, total=float(arr.sum()))


def _sample_chunk(p: CoxianParams, size: int, rng: np.random.Generator, with_exits: bool = False):
    lam = np.append(p.lam, 0.0)
    total_rate = lam + p.mu
    totals = np.zeros(size)
    exits = np.full(size, p.n, dtype=np.int64)
    alive = np.arange(size)
    for k in range(p.n):
        if alive.size == 0:
            break
        totals[alive] += -np.log(open_uniform(rng, alive.size)) / total_rate[k]
        if k == p.n - 1:
            break
        absorbed = open_uniform(rng, alive.size) * total_rate[k] < p.mu[k]
        exits[alive[absorbed]] = k + 1
        alive = alive[~absorbed]
    return (totals, exits) if with_exits else totals


def _chunk_job(args):
    p, size, seed, index = args
    return _sample_chunk(p, size, stream(seed, index))


def sample_dataset(
    p: CoxianParams,
    N: int,
    seed: int,
    chunk_size: int = DEFAULT_CHUNK,
    n_jobs: int = 1,
) -> np.ndarray:
    """Draw ``N`` absorption times.

    The output depends only on ``(p, N, seed, chunk_size)``: chunk ``c`` uses
    stream ``c`` of ``seed`` whether chunks run serially or in worker
    processes.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    sizes = [min(chunk_size, N - start) for start in range(0, N, chunk_size)]
    jobs = [(p, size, seed, i) for i, size in enumerate(sizes)]
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(_chunk_job, jobs))
    else:
        parts = [_chunk_job(job) for job in jobs]
    return np.concatenate(parts)


def sample_exit_phases(p: CoxianParams, N: int, seed: int) -> np.ndarray:
    """Phase (1-based) from which each of ``N`` simulated paths absorbs."""
    _, exits = _sample_chunk(p, N, stream(seed, 0), with_exits=True)
    return exits
