"""Seeded Monte Carlo estimates of the noise-averaged fidelity.

Samples are processed in the fixed index chunks used by
:mod:`pulsechain.noise`, so every chunk is reproducible on its own.  Chunks
may be evaluated by any number of worker threads; their partial moments are
merged in chunk order, which makes the result independent of the worker count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import chain
from .chain import ChainSpec
from .errors import AllSamplesRejected, ConfigError
from .noise import CHUNK_SIZE, IndependentUniformModel, NoiseModel, sample_batch

THREADS_ENV = "PULSECHAIN_THREADS"


@dataclass
class RunningMoments:
    """Count, mean and sum of squared deviations for several columns at once."""

    count: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def empty(cls, width: int) -> "RunningMoments":
        return cls(0, np.zeros(width), np.zeros(width))

    @classmethod
    def from_values(cls, values: np.ndarray) -> "RunningMoments":
        values = np.asarray(values, dtype=float)
        if values.shape[0] == 0:
            return cls.empty(values.shape[1])
        mean = values.mean(axis=0)
        return cls(values.shape[0], mean, ((values - mean) ** 2).sum(axis=0))

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        # pairwise combination of Chan, Golub and LeVeque
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + delta ** 2 * (self.count * other.count / n)
        return RunningMoments(n, mean, m2)

    @property
    def stderr(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros_like(self.mean)
        return np.sqrt(self.m2 / (self.count - 1) / self.count)


@dataclass(frozen=True)
class FidelityEstimate:
    n_samples: int
    mean_F: float
    se_F: float
    mean_psi: float
    se_psi: float
    mean_sq_psi: float
    se_sq_psi: float
    n_rejected: int = 0


@dataclass(frozen=True)
class PairedEstimate:
    a: FidelityEstimate
    b: FidelityEstimate
    mode_a: str
    mode_b: str
    gap_mean: float
    gap_se: float
    n_pairs: int


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                workers = int(env)
            except ValueError:
                raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        else:
            workers = os.cpu_count() or 1
    return max(1, int(workers))


def _chunks(n: int):
    return [(s, min(s + CHUNK_SIZE, n)) for s in range(0, n, CHUNK_SIZE)]


def _run_chunks(fn, n, workers):
    chunks = _chunks(n)
    workers = min(worker_count(workers), len(chunks))
    if workers <= 1:
        return [fn(*c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: fn(*c), chunks))


def _sample_psi(spec, model, seed, start, stop, mode, verify):
    """Corrected last-site amplitudes for one chunk and its acceptance mask."""
    tau, theta = sample_batch(model, spec.K, seed, start, stop, mode=mode)
    accepted = np.all(chain.schedule_durations(spec, tau) > 0, axis=1)
    tau, theta = tau[accepted], theta[accepted]
    if verify:
        final = chain.propagate_batch(spec, tau, theta)
        psi = chain.protocol_sign(spec) * final[:, -1]
    else:
        psi = chain.pulse_factor(theta) * chain.time_factor(tau)
    return psi, accepted


def _columns(psi):
    psi = np.asarray(psi)
    mod2 = np.abs(psi) ** 2
    re = psi.real
    return np.column_stack([re, mod2, 0.5 + mod2 / 6 + re / 3])


def _to_estimate(acc: RunningMoments, rejected: int) -> FidelityEstimate:
    se = acc.stderr
    return FidelityEstimate(
        n_samples=acc.count,
        mean_F=float(acc.mean[2]), se_F=float(se[2]),
        mean_psi=float(acc.mean[0]), se_psi=float(se[0]),
        mean_sq_psi=float(acc.mean[1]), se_sq_psi=float(se[1]),
        n_rejected=rejected,
    )


def estimate(spec: ChainSpec, model: NoiseModel, n: int, seed: int, *,
             mode: str | None = None, verify: bool = False,
             workers: int | None = None) -> FidelityEstimate:
    """Monte Carlo estimate of the averaged fidelity over ``n`` noise draws.

    Parameters
    ----------
    mode : str, optional
        Overrides the sampling mode of an independent model.
    verify : bool
        Use full amplitude propagation instead of the product formula.
    workers : int, optional
        Thread count; defaults to ``$PULSECHAIN_THREADS`` or the CPU count.

    Draws whose schedule is non-monotone are excluded and counted in
    ``n_rejected``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")

    def work(start, stop):
        psi, accepted = _sample_psi(spec, model, seed, start, stop, mode, verify)
        return RunningMoments.from_values(_columns(psi)), int((~accepted).sum())

    acc, rejected = RunningMoments.empty(3), 0
    for part, rej in _run_chunks(work, n, workers):
        acc = acc.merge(part)
        rejected += rej
    if acc.count == 0:
        raise AllSamplesRejected(f"all {n} draws produced non-monotone schedules")
    return _to_estimate(acc, rejected)


def estimate_paired(spec: ChainSpec, model: IndependentUniformModel, n: int, seed: int,
                    mode_a: str = "tau-exact", mode_b: str = "delta-independent", *,
                    workers: int | None = None) -> PairedEstimate:
    """Estimates under two timing-sampling modes with common random numbers.

    Both modes consume the same pulse angles and the same timing uniforms, so
    the per-sample fidelity gap ``F_a - F_b`` has a small variance.
    """
    if not isinstance(model, IndependentUniformModel):
        raise TypeError("paired estimation compares sampling modes of an independent model")
    if n < 1:
        raise ValueError("n must be at least 1")

    def work(start, stop):
        psi_a, ok_a = _sample_psi(spec, model, seed, start, stop, mode_a, False)
        psi_b, ok_b = _sample_psi(spec, model, seed, start, stop, mode_b, False)
        cols_a, cols_b = _columns(psi_a), _columns(psi_b)
        both = ok_a & ok_b
        gap = cols_a[both[ok_a], 2] - cols_b[both[ok_b], 2]
        return (RunningMoments.from_values(cols_a), int((~ok_a).sum()),
                RunningMoments.from_values(cols_b), int((~ok_b).sum()),
                RunningMoments.from_values(gap[:, None]))

    acc_a, acc_b, acc_gap = RunningMoments.empty(3), RunningMoments.empty(3), RunningMoments.empty(1)
    rej_a = rej_b = 0
    for pa, ra, pb, rb, pg in _run_chunks(work, n, workers):
        acc_a, acc_b, acc_gap = acc_a.merge(pa), acc_b.merge(pb), acc_gap.merge(pg)
        rej_a += ra
        rej_b += rb
    if acc_a.count == 0 or acc_b.count == 0:
        raise AllSamplesRejected(f"all {n} draws produced non-monotone schedules")
    return PairedEstimate(
        a=_to_estimate(acc_a, rej_a), b=_to_estimate(acc_b, rej_b),
        mode_a=mode_a, mode_b=mode_b,
        gap_mean=float(acc_gap.mean[0]), gap_se=float(acc_gap.stderr[0]),
        n_pairs=acc_gap.count,
    )
