"""Stochastic models for pulse-angle and timing noise.

Random numbers are derived counter-style: sample ``i`` of stream ``label``
under master seed ``s`` always receives the same uniforms, however the
samples are split across workers.  Samples are grouped in fixed chunks of
:data:`CHUNK_SIZE`; chunk ``c`` is generated by a Philox generator seeded
from ``SeedSequence(s, spawn_key=(label_id, c))``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Union

import numpy as np

from .chain import NoiseRealization
from .errors import DegenerateWidth, ParameterOutOfRange

CHUNK_SIZE = 2048
STREAMS = {"pulse": 1, "time": 2}

MODES = ("tau-exact", "delta-independent")
TARGETS = ("pulses", "times")

MAX_EPS_THETA = np.pi / 2
MAX_EPS_TAU = np.pi / (4 * np.sqrt(2))


@dataclass(frozen=True)
class SeedSpec:
    seed: int
    index: int = 0
    label: str = "pulse"

    def __post_init__(self):
        if self.label not in STREAMS:
            raise ValueError(f"unknown stream label {self.label!r}")
        if self.seed < 0 or self.index < 0:
            raise ValueError("seed and index must be nonnegative")


def _chunk_uniforms(seed: int, label: str, chunk: int, width: int) -> np.ndarray:
    ss = np.random.SeedSequence(seed, spawn_key=(STREAMS[label], chunk))
    return np.random.Generator(np.random.Philox(ss)).random((CHUNK_SIZE, width))


def stream_uniforms(seed: int, label: str, start: int, stop: int, width: int) -> np.ndarray:
    """Uniforms on [0, 1) for samples ``start..stop-1``, ``width`` per sample."""
    if stop <= start:
        return np.empty((0, width))
    first, last = start // CHUNK_SIZE, (stop - 1) // CHUNK_SIZE
    parts = [_chunk_uniforms(seed, label, c, width) for c in range(first, last + 1)]
    block = np.concatenate(parts) if len(parts) > 1 else parts[0]
    offset = first * CHUNK_SIZE
    return block[start - offset:stop - offset]


# --- models ------------------------------------------------------------------


@dataclass(frozen=True)
class IndependentUniformModel:
    """Uniform i.i.d. noise on pulse angles and timing offsets.

    ``mode="tau-exact"`` draws every timing offset independently.
    ``mode="delta-independent"`` draws the first offset and then treats the
    consecutive offset differences as independent triangular variables,
    which is the factorization the closed-form moments rely on.
    """

    eps_theta: float = 0.0
    eps_tau: float = 0.0
    mode: str = "delta-independent"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterOutOfRange(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 <= self.eps_theta < MAX_EPS_THETA:
            raise ParameterOutOfRange(f"eps_theta must lie in [0, pi/2), got {self.eps_theta}")
        if not 0 <= self.eps_tau < MAX_EPS_TAU:
            raise ParameterOutOfRange(
                f"eps_tau must lie in [0, pi/(4 sqrt 2)), got {self.eps_tau}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ThreeValueCorrelatedModel:
    """Values in {+eps, 0, -eps} with marginal (p, 1-2p, p) and one-step memory q."""

    eps: float
    p: float
    q: float
    target: str = "pulses"

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ParameterOutOfRange(f"target must be one of {TARGETS}, got {self.target!r}")
        if not 0 <= self.p <= 0.5:
            raise ParameterOutOfRange(f"p must lie in [0, 1/2], got {self.p}")
        if not 0 <= self.q <= 1:
            raise ParameterOutOfRange(f"q must lie in [0, 1], got {self.q}")
        if not self.eps >= 0:
            raise ParameterOutOfRange(f"eps must be nonnegative, got {self.eps}")

    @property
    def values(self) -> np.ndarray:
        """State values ordered (+eps, 0, -eps)."""
        return np.array([self.eps, 0.0, -self.eps])

    @property
    def marginal(self) -> np.ndarray:
        return np.array([self.p, 1 - 2 * self.p, self.p])

    @property
    def label(self) -> str:
        return "pulse" if self.target == "pulses" else "time"

    def to_dict(self) -> dict:
        return asdict(self)


NoiseModel = Union[IndependentUniformModel, ThreeValueCorrelatedModel]


def model_from_config(cfg: dict) -> NoiseModel:
    """Build a model from flat config keys (``eps_theta``, ``eps_tau``, ``p``, ``q``, ``mode``...)."""
    if "p" in cfg or "q" in cfg:
        return ThreeValueCorrelatedModel(
            eps=float(cfg.get("eps", 0.0)), p=float(cfg.get("p", 0.0)),
            q=float(cfg.get("q", 0.0)), target=cfg.get("target", "pulses"))
    eps = cfg.get("eps")
    return IndependentUniformModel(
        eps_theta=float(cfg.get("eps_theta", eps if eps is not None else 0.0)),
        eps_tau=float(cfg.get("eps_tau", eps if eps is not None else 0.0)),
        mode=cfg.get("mode", "delta-independent"))


# --- transforms of uniforms --------------------------------------------------


def triangular_density(delta, eps: float):
    """Density of the difference of two independent uniforms on [-eps, eps]."""
    if eps == 0:
        raise DegenerateWidth("triangular density with zero width is a point mass")
    delta = np.asarray(delta, dtype=float)
    out = np.clip(2 * eps - np.abs(delta), 0.0, None) / (4 * eps ** 2)
    return out if out.ndim else float(out)


def triangular_ppf(u, eps: float):
    """Inverse CDF of :func:`triangular_density`."""
    u = np.asarray(u, dtype=float)
    w = 2 * eps
    lo = -w + w * np.sqrt(2 * u)
    hi = w - w * np.sqrt(2 * (1 - u))
    return np.where(u < 0.5, lo, hi)


def _uniform_values(u, eps):
    return eps * (2 * u - 1)


def _three_value_chain(u, model: ThreeValueCorrelatedModel) -> np.ndarray:
    # u has shape (n, 2 * length): column 2j picks the marginal value,
    # column 2j+1 decides whether position j copies its predecessor.
    draw, keep = u[:, 0::2], u[:, 1::2]
    p = model.p
    fresh = np.where(draw < p, model.eps, np.where(draw < 1 - p, 0.0, -model.eps))
    out = fresh.copy()
    for j in range(1, out.shape[1]):
        out[:, j] = np.where(keep[:, j] < model.q, out[:, j - 1], fresh[:, j])
    return out


# --- sampling ----------------------------------------------------------------


def sample_batch(model: NoiseModel, K: int, seed: int, start: int, stop: int,
                 mode: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Noise for samples ``start..stop-1`` as arrays ``tau (n, K+2)``, ``theta (n, K+1)``.

    ``mode`` overrides the sampling mode of an independent model; the pulse
    stream and the uniforms behind the timing stream are shared between modes.
    """
    n = stop - start
    tau = np.zeros((n, K + 2))
    theta = np.zeros((n, K + 1))
    if isinstance(model, IndependentUniformModel):
        mode = mode or model.mode
        if mode not in MODES:
            raise ParameterOutOfRange(f"mode must be one of {MODES}, got {mode!r}")
        if model.eps_theta > 0:
            theta = _uniform_values(stream_uniforms(seed, "pulse", start, stop, K + 1),
                                    model.eps_theta)
        if model.eps_tau > 0:
            u = stream_uniforms(seed, "time", start, stop, K + 2)
            if mode == "tau-exact":
                tau = _uniform_values(u, model.eps_tau)
            else:
                steps = np.concatenate([_uniform_values(u[:, :1], model.eps_tau),
                                        triangular_ppf(u[:, 1:], model.eps_tau)], axis=1)
                tau = np.cumsum(steps, axis=1)
    elif isinstance(model, ThreeValueCorrelatedModel):
        length = K + 1 if model.target == "pulses" else K + 2
        if model.eps > 0 and model.p > 0:
            u = stream_uniforms(seed, model.label, start, stop, 2 * length)
            values = _three_value_chain(u, model)
            if model.target == "pulses":
                theta = values
            else:
                tau = values
    else:
        raise TypeError(f"unsupported noise model {type(model).__name__}")
    return tau, theta


def sample_independent(model: IndependentUniformModel, K: int, seed: int,
                       index: int = 0) -> NoiseRealization:
    """The ``index``-th realization under master ``seed``."""
    if not isinstance(model, IndependentUniformModel):
        raise TypeError("sample_independent needs an IndependentUniformModel")
    tau, theta = sample_batch(model, K, seed, index, index + 1)
    return NoiseRealization(tau[0], theta[0])


def sample_realization(model: NoiseModel, K: int, seed: int, index: int = 0) -> NoiseRealization:
    tau, theta = sample_batch(model, K, seed, index, index + 1)
    return NoiseRealization(tau[0], theta[0])


def sample_correlated(model: ThreeValueCorrelatedModel, length: int, seed: int,
                      index: int = 0) -> np.ndarray:
    """One Markov sequence of ``length`` values in {-eps, 0, +eps}."""
    if length < 1:
        raise ValueError("length must be at least 1")
    if model.eps == 0 or model.p == 0:
        return np.zeros(length)
    u = stream_uniforms(seed, model.label, index, index + 1, 2 * length)
    return _three_value_chain(u, model)[0]


def sample_correlated_batch(model: ThreeValueCorrelatedModel, length: int, seed: int,
                            start: int, stop: int) -> np.ndarray:
    if model.eps == 0 or model.p == 0:
        return np.zeros((stop - start, length))
    u = stream_uniforms(seed, model.label, start, stop, 2 * length)
    return _three_value_chain(u, model)
