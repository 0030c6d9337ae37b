"""Noise-averaged transfer fidelity without sampling.

Two families of results:

* independent uniform noise, where the last-site amplitude factorizes and
  its first two moments are products of sinc brackets;
* three-value Markov noise, where the moments are 3x3 transfer-matrix
  contractions.

All amplitudes are sign-corrected, i.e. equal to +1 for the noiseless protocol.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterOutOfRange

SQRT2 = np.sqrt(2.0)

STATE_ORDER = ("+eps", "0", "-eps")


@dataclass(frozen=True)
class MomentPair:
    mean_psi: float
    mean_sq_psi: float


def sinc(x):
    """Unnormalized ``sin(x)/x`` with a series branch near zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    x2 = x * x
    out = np.where(small, 1 - x2 / 6 + x2 * x2 / 120, np.sin(safe) / safe)
    return out if out.ndim else float(out)


def averaged_fidelity(m: MomentPair) -> float:
    """Input- and disorder-averaged fidelity from the two amplitude moments."""
    return 0.5 + m.mean_sq_psi / 6 + m.mean_psi / 3


# --- independent uniform noise -----------------------------------------------


def independent_moments(eps_theta: float, eps_tau: float, K: int) -> MomentPair:
    """Exact moments for uniform pulse and timing noise with independent offset differences."""
    if eps_theta < 0 or eps_tau < 0:
        raise ParameterOutOfRange("noise widths must be nonnegative")
    a, b = eps_theta, eps_tau
    mean = (sinc(a) ** (K + 1)
            * sinc(SQRT2 * b) ** 3
            * ((1 + sinc(2 * b) ** 2) / 2) ** K)
    mean_sq = (((1 + sinc(2 * a)) / 2) ** (K + 1)
               * (1 + sinc(2 * SQRT2 * b)) / 2
               * (1 + sinc(2 * SQRT2 * b) ** 2) / 2
               * ((3 + 4 * sinc(2 * b) ** 2 + sinc(4 * b) ** 2) / 8) ** K)
    return MomentPair(float(mean), float(mean_sq))


def independent_fidelity(eps_theta: float, eps_tau: float, K: int) -> float:
    return averaged_fidelity(independent_moments(eps_theta, eps_tau, K))


# --- three-value Markov noise ------------------------------------------------


def _check_pq(p, q):
    if not 0 <= p <= 0.5:
        raise ParameterOutOfRange(f"p must lie in [0, 1/2], got {p}")
    if not 0 <= q <= 1:
        raise ParameterOutOfRange(f"q must lie in [0, 1], got {q}")


def stationary_vector(p: float) -> np.ndarray:
    return np.array([p, 1 - 2 * p, p])


def transition_matrix(p: float, q: float) -> np.ndarray:
    """Column-stochastic matrix with entry ``[x, x']`` = P(next = x | current = x').

    States are ordered (+eps, 0, -eps).
    """
    _check_pq(p, q)
    return q * np.eye(3) + (1 - q) * np.outer(stationary_vector(p), np.ones(3))


_PULSE_KINDS = {
    "cos": np.cos,
    "cos2": lambda x: np.cos(x) ** 2,
}


def _time_kernels(kind):
    if kind == "linear":
        return (lambda x: np.cos(SQRT2 * x),
                lambda d: (1 + np.cos(2 * d)) / 2,
                lambda d: np.cos(SQRT2 * d))
    if kind == "squared":
        return (lambda x: np.cos(SQRT2 * x) ** 2,
                lambda d: ((1 + np.cos(2 * d)) / 2) ** 2,
                lambda d: np.cos(SQRT2 * d) ** 2)
    raise ValueError(f"time moment kind must be 'linear' or 'squared', got {kind!r}")


def pulse_kernel(kind: str, eps: float) -> np.ndarray:
    """Diagonal kernel ``diag(f(+eps), f(0), f(-eps))``."""
    try:
        f = _PULSE_KINDS[kind]
    except KeyError:
        raise ValueError(f"pulse moment kind must be 'cos' or 'cos2', got {kind!r}") from None
    return np.diag(f(np.array([eps, 0.0, -eps])))


def time_kernels(kind: str, eps: float):
    """Start (diagonal), bulk and final difference kernels for timing moments."""
    start, bulk, final = _time_kernels(kind)
    x = np.array([eps, 0.0, -eps])
    d = x[:, None] - x[None, :]
    return np.diag(start(x)), bulk(d), final(d)


def correlated_pulse_moment(kind: str, eps: float, p: float, q: float, K: int) -> float:
    """``<prod_i f(theta_i)>`` over a three-value Markov chain of K+1 pulse angles.

    Contracts ``(1,1,1) (F T)^K F pi`` right to left, the first pulse acting on
    the stationary vector ``pi``.
    """
    T = transition_matrix(p, q)
    F = pulse_kernel(kind, eps)
    v = F @ stationary_vector(p)
    step = F @ T
    for _ in range(K):
        v = step @ v
    return float(v.sum())


def correlated_time_moment(kind: str, eps: float, p: float, q: float, K: int) -> float:
    """Moment of the timing factor when the K+2 offsets form a three-value Markov chain.

    ``kind="linear"`` gives the mean, ``"squared"`` the mean square.
    """
    T = transition_matrix(p, q)
    S, G, H = time_kernels(kind, eps)
    v = S @ stationary_vector(p)
    bulk = G * T
    for _ in range(K):
        v = bulk @ v
    v = (H * T) @ v
    return float(v.sum())


def correlated_pulse_moments(eps, p, q, K) -> MomentPair:
    return MomentPair(correlated_pulse_moment("cos", eps, p, q, K),
                      correlated_pulse_moment("cos2", eps, p, q, K))


def correlated_time_moments(eps, p, q, K) -> MomentPair:
    return MomentPair(correlated_time_moment("linear", eps, p, q, K),
                      correlated_time_moment("squared", eps, p, q, K))


def correlated_fidelity(target: str, eps: float, p: float, q: float, K: int) -> float:
    if target == "pulses":
        return averaged_fidelity(correlated_pulse_moments(eps, p, q, K))
    if target == "times":
        return averaged_fidelity(correlated_time_moments(eps, p, q, K))
    raise ValueError(f"target must be 'pulses' or 'times', got {target!r}")


# --- special cases -----------------------------------------------------------


def closed_form_q1_pulse(eps: float, p: float, K: int) -> float:
    """Fully correlated pulse noise: every pulse carries the first pulse's angle."""
    c = np.cos(eps)
    return float(1 - p + p / 3 * (2 * c ** (K + 1) + c ** (2 * K + 2)))


def closed_form_q0_pulse(eps: float, p: float, K: int, paper_verbatim: bool = False) -> float:
    """Uncorrelated three-value pulse noise.

    The mean amplitude is ``[1 - 4p sin^2(eps/2)]^(K+1)`` and the mean square
    ``[1 - 2p sin^2 eps]^(K+1)``.  ``paper_verbatim=True`` returns the
    printed variant, which pairs the two brackets with the opposite
    coefficients.
    """
    mean = (1 - 4 * p * np.sin(eps / 2) ** 2) ** (K + 1)
    mean_sq = (1 - 2 * p * np.sin(eps) ** 2) ** (K + 1)
    if paper_verbatim:
        return float(0.5 + mean / 6 + mean_sq / 3)
    return float(0.5 + mean_sq / 6 + mean / 3)


def closed_form_q1_time(eps: float, p: float) -> float:
    """Fully correlated timing noise; only ``cos(sqrt2 tau_1)`` survives."""
    c = np.cos(SQRT2 * eps)
    mean = 1 - 2 * p + 2 * p * c
    mean_sq = 1 - 2 * p + 2 * p * c ** 2
    return float(0.5 + mean_sq / 6 + mean / 3)


def printed_q1_time(eps: float, p: float) -> float:
    """Printed variant of the fully correlated timing result, kept for comparison only."""
    s2 = np.sin(2 * eps) ** 2
    return float(1 - 2 * p / 3 * s2 * (2 + s2))
