"""Protocol dynamics in the virtual chain.

The diamond lattice decomposes, in the symmetric/antisymmetric pair basis,
into a two-site sub-chain, ``K`` three-site sub-chains and a final two-site
sub-chain.  Free evolution acts block-wise on these sub-chains; the pulses
couple the last site of each sub-chain to the first site of the next one.

Virtual sites are numbered 1..N in everything user-facing.  Internally the
amplitude vectors are ordinary 0-based numpy arrays, so virtual site ``i``
lives at position ``i - 1``.  All propagation helpers accept a leading batch
dimension, i.e. amplitude arrays of shape ``(..., N)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag

from .errors import InvalidAmplitude, NonMonotoneSchedule

SQRT2 = np.sqrt(2.0)
TWO_SITE_TRANSFER_TIME = np.pi / (2 * SQRT2)
THREE_SITE_TRANSFER_TIME = np.pi / 2

AMPLITUDE_TOL = 1e-9


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ChainSpec:
    """Geometry of a chain built from ``K`` three-site sub-chains."""

    K: int

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 0:
            raise ValueError(f"K must be a nonnegative integer, got {self.K!r}")
        object.__setattr__(self, "K", int(self.K))

    @classmethod
    def from_sites(cls, N: int) -> "ChainSpec":
        if N < 4 or (N - 4) % 3:
            raise ValueError(f"N must be of the form 3K+4, got {N}")
        return cls((N - 4) // 3)

    @property
    def N(self) -> int:
        return 3 * self.K + 4

    @property
    def segment_sizes(self) -> list[int]:
        return [2] + [3] * self.K + [2]

    @property
    def apex_sites(self) -> list[int]:
        """1-based virtual indices of the apex sites, ``3i + 1``."""
        return [3 * i + 1 for i in range(self.K + 2)]

    @property
    def pulse_pairs(self) -> list[tuple[int, int]]:
        """1-based virtual index pairs ``(3n + 2, 3n + 3)`` coupled by pulses."""
        return [(3 * n + 2, 3 * n + 3) for n in range(self.K + 1)]


@dataclass(frozen=True)
class Schedule:
    pulse_times: tuple[float, ...]
    final_time: float
    durations: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        times = np.array(list(self.pulse_times) + [self.final_time], dtype=float)
        durations = np.diff(np.concatenate(([0.0], times)))
        if not np.all(np.isfinite(durations)):
            raise NonMonotoneSchedule("schedule contains non-finite times")
        bad = np.flatnonzero(durations <= 0)
        if bad.size:
            j = int(bad[0]) + 1
            raise NonMonotoneSchedule(
                f"segment {j} has non-positive duration {durations[bad[0]]:.6g}; "
                "timing noise is too large for the pulse sequence"
            )
        object.__setattr__(self, "pulse_times", tuple(float(t) for t in self.pulse_times))
        object.__setattr__(self, "final_time", float(self.final_time))
        durations.setflags(write=False)
        object.__setattr__(self, "durations", durations)


@dataclass(frozen=True)
class NoiseRealization:
    """One draw of timing offsets ``tau`` (K+2 values) and pulse angles ``theta`` (K+1 values)."""

    tau: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        tau = _frozen_array(self.tau)
        theta = _frozen_array(self.theta)
        if tau.ndim != 1 or theta.ndim != 1:
            raise ValueError("tau and theta must be one-dimensional")
        if not (np.all(np.isfinite(tau)) and np.all(np.isfinite(theta))):
            raise ValueError("noise values must be finite")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def zero(cls, spec: ChainSpec) -> "NoiseRealization":
        return cls(np.zeros(spec.K + 2), np.zeros(spec.K + 1))

    def check(self, spec: ChainSpec) -> None:
        if self.tau.shape != (spec.K + 2,) or self.theta.shape != (spec.K + 1,):
            raise ValueError(
                f"noise for K={spec.K} needs {spec.K + 2} tau and {spec.K + 1} theta values, "
                f"got {self.tau.size} and {self.theta.size}"
            )

    def __eq__(self, other):
        if not isinstance(other, NoiseRealization):
            return NotImplemented
        return np.array_equal(self.tau, other.tau) and np.array_equal(self.theta, other.theta)

    __hash__ = None


@dataclass(frozen=True)
class QubitState:
    alpha: complex
    beta: complex

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1) > 1e-12:
            raise ValueError(f"qubit state is not normalized (|a|^2+|b|^2 = {norm!r})")

    @classmethod
    def from_angles(cls, theta: float, phi: float) -> "QubitState":
        """Bloch-sphere parametrization ``alpha = cos(theta/2)``, ``beta = sin(theta/2) e^{-i phi}``."""
        return cls(complex(np.cos(theta / 2)), complex(np.sin(theta / 2) * np.exp(-1j * phi)))


# --- schedules ---------------------------------------------------------------


def ideal_schedule(spec: ChainSpec) -> Schedule:
    pulses = [TWO_SITE_TRANSFER_TIME + j * THREE_SITE_TRANSFER_TIME for j in range(spec.K + 1)]
    final = 2 * TWO_SITE_TRANSFER_TIME + spec.K * THREE_SITE_TRANSFER_TIME
    return Schedule(tuple(pulses), final)


def noisy_schedule(spec: ChainSpec, noise: NoiseRealization) -> Schedule:
    """Ideal pulse times shifted by ``tau[:K+1]``, final time shifted by ``tau[K+1]``."""
    noise.check(spec)
    ideal = ideal_schedule(spec)
    pulses = np.asarray(ideal.pulse_times) + noise.tau[:-1]
    return Schedule(tuple(pulses), ideal.final_time + noise.tau[-1])


# --- block unitaries ---------------------------------------------------------


def two_site_block(t):
    """``exp(-i sqrt(2) t sigma_x)``; ``t`` may be an array, giving shape ``(..., 2, 2)``."""
    t = np.asarray(t, dtype=float)
    c = np.cos(SQRT2 * t)
    s = -1j * np.sin(SQRT2 * t)
    return np.stack([np.stack([c, s], -1), np.stack([s, c], -1)], -2).astype(complex)


def three_site_block(t):
    """``exp(-2 i t S_x)`` for the spin-1 ``S_x``; broadcasts like :func:`two_site_block`."""
    t = np.asarray(t, dtype=float)
    c = np.cos(2 * t)
    s = -1j * np.sin(2 * t) / SQRT2
    a = (1 + c) / 2
    b = (c - 1) / 2
    rows = [
        np.stack([a, s, b], -1),
        np.stack([s, c, s], -1),
        np.stack([b, s, a], -1),
    ]
    return np.stack(rows, -2).astype(complex)


def pulse_block(theta):
    """The 2x2 noisy pulse ``[[i sin, cos], [cos, i sin]]``; ``sigma_x`` at ``theta = 0``."""
    theta = np.asarray(theta, dtype=float)
    c = np.cos(theta).astype(complex)
    s = 1j * np.sin(theta)
    return np.stack([np.stack([s, c], -1), np.stack([c, s], -1)], -2)


def segment_unitary(spec: ChainSpec, duration: float) -> np.ndarray:
    """Dense N x N free evolution over ``duration``.

    Propagation never builds this matrix; it is kept for inspection and tests.
    """
    blocks = [two_site_block(duration)]
    blocks += [three_site_block(duration)] * spec.K
    blocks.append(two_site_block(duration))
    return block_diag(*blocks)


def pulse_layer(spec: ChainSpec, theta: float | Sequence[float]) -> np.ndarray:
    """Dense N x N pulse: identity on apex sites, :func:`pulse_block` on each coupled pair.

    A scalar ``theta`` is the global pulse used by the protocol (same angle on
    every pair); a sequence of K+1 angles sets the pairs individually.
    """
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (spec.K + 1,)) \
        if np.ndim(theta) == 0 else np.asarray(theta, dtype=float)
    if theta.shape != (spec.K + 1,):
        raise ValueError(f"pulse layer for K={spec.K} needs {spec.K + 1} angles")
    P = np.eye(spec.N, dtype=complex)
    for (i, j), block in zip(spec.pulse_pairs, pulse_block(theta)):
        idx = np.array([i - 1, j - 1])
        P[np.ix_(idx, idx)] = block
    return P


# --- block-wise application --------------------------------------------------


def apply_segment(spec: ChainSpec, amplitudes: np.ndarray, duration) -> np.ndarray:
    """Free evolution applied block by block to ``amplitudes`` of shape ``(..., N)``.

    ``duration`` is a scalar or an array broadcasting against the batch shape.
    """
    x = np.asarray(amplitudes, dtype=complex)
    N, K = spec.N, spec.K
    duration = np.asarray(duration, dtype=float)
    u2 = two_site_block(duration)
    out = np.empty(np.broadcast_shapes(x.shape, duration.shape + (N,)), dtype=complex)
    out[..., 0:2] = np.einsum("...ij,...j->...i", u2, x[..., 0:2])
    out[..., N - 2:] = np.einsum("...ij,...j->...i", u2, x[..., N - 2:])
    if K:
        u3 = three_site_block(duration)
        mid = x[..., 2:N - 2].reshape(x.shape[:-1] + (K, 3))
        out[..., 2:N - 2] = np.einsum("...ij,...kj->...ki", u3, mid).reshape(
            out.shape[:-1] + (3 * K,)
        )
    return out


def apply_pulse(spec: ChainSpec, amplitudes: np.ndarray, theta) -> np.ndarray:
    """Pulse layer applied pairwise.

    ``theta`` broadcasts against ``(..., K+1)``: pass ``(..., 1)`` for a global
    pulse angle per batch row.
    """
    x = np.array(amplitudes, dtype=complex)
    theta = np.asarray(theta, dtype=float)
    upper = slice(1, 3 * spec.K + 2, 3)
    lower = slice(2, 3 * spec.K + 3, 3)
    a, b = x[..., upper], x[..., lower]
    c, s = np.cos(theta), 1j * np.sin(theta)
    x[..., upper], x[..., lower] = s * a + c * b, c * a + s * b
    return x


def _propagate_durations(spec, durations, theta, amplitudes):
    # durations: (..., K+2); theta: (..., K+1)
    x = apply_segment(spec, amplitudes, durations[..., 0])
    for j in range(spec.K + 1):
        x = apply_pulse(spec, x, theta[..., j, None])
        x = apply_segment(spec, x, durations[..., j + 1])
    return x


def basis_state(spec: ChainSpec, site: int = 1) -> np.ndarray:
    """Amplitude vector with a single excitation on 1-based virtual ``site``."""
    if not 1 <= site <= spec.N:
        raise ValueError(f"site must lie in 1..{spec.N}")
    v = np.zeros(spec.N, dtype=complex)
    v[site - 1] = 1.0
    return v


def propagate(spec: ChainSpec, noise: NoiseRealization, initial: np.ndarray) -> np.ndarray:
    """Evolve ``initial`` through the noisy protocol and return the final amplitudes.

    Raises
    ------
    NonMonotoneSchedule
        If the timing offsets reorder the pulses.
    """
    schedule = noisy_schedule(spec, noise)
    initial = np.asarray(initial, dtype=complex)
    if initial.shape != (spec.N,):
        raise ValueError(f"initial state must have {spec.N} amplitudes")
    return _propagate_durations(spec, schedule.durations, noise.theta, initial)


def propagate_batch(spec: ChainSpec, tau: np.ndarray, theta: np.ndarray,
                    initial: np.ndarray | None = None) -> np.ndarray:
    """Vectorized :func:`propagate` over rows of ``tau`` (n, K+2) and ``theta`` (n, K+1).

    Rows whose schedule is non-monotone are not rejected here; callers filter them
    with :func:`schedule_durations`.
    """
    durations = schedule_durations(spec, tau)
    theta = np.asarray(theta, dtype=float)
    if initial is None:
        initial = basis_state(spec, 1)
    x = np.broadcast_to(np.asarray(initial, dtype=complex), theta.shape[:-1] + (spec.N,))
    return _propagate_durations(spec, durations, theta, x)


def schedule_durations(spec: ChainSpec, tau: np.ndarray) -> np.ndarray:
    """Segment durations of noisy schedules for rows of ``tau``, without validation."""
    tau = np.asarray(tau, dtype=float)
    ideal = ideal_schedule(spec).durations
    prev = np.concatenate([np.zeros(tau.shape[:-1] + (1,)), tau[..., :-1]], axis=-1)
    return ideal + tau - prev


# --- transfer amplitude ------------------------------------------------------


def pulse_factor(theta) -> np.ndarray:
    """Product of ``cos(theta_i)`` over the last axis."""
    return np.prod(np.cos(np.asarray(theta, dtype=float)), axis=-1)


def time_factor(tau) -> np.ndarray:
    """Timing part of the last-site amplitude for offsets ``tau`` (last axis K+2)."""
    tau = np.asarray(tau, dtype=float)
    diffs = np.diff(tau, axis=-1)
    first = np.cos(SQRT2 * tau[..., 0])
    middle = np.prod((1 + np.cos(2 * diffs[..., :-1])) / 2, axis=-1)
    last = np.cos(SQRT2 * diffs[..., -1])
    return first * middle * last


def protocol_sign(spec: ChainSpec) -> int:
    """Deterministic phase ``(-1)^(K+1)`` of the ideal protocol's last-site amplitude."""
    return -1 if spec.K % 2 == 0 else 1


def product_amplitude(spec: ChainSpec, noise: NoiseRealization) -> float:
    """Last-site amplitude from the closed product over pulse and timing factors."""
    noise.check(spec)
    return protocol_sign(spec) * float(pulse_factor(noise.theta) * time_factor(noise.tau))


def last_amplitude(spec: ChainSpec, noise: NoiseRealization) -> complex:
    """``<N| U |1>`` by full propagation of the first virtual site."""
    final = propagate(spec, noise, basis_state(spec, 1))
    return complex(final[-1])


def corrected_psi_N(spec: ChainSpec, noise: NoiseRealization, raw: bool = False):
    """Last-site amplitude with the protocol phase removed.

    With ``raw=True`` the uncorrected complex amplitude is returned instead.
    """
    amp = last_amplitude(spec, noise)
    if raw:
        return amp
    corrected = protocol_sign(spec) * amp
    if abs(corrected.imag) > 1e-10:
        raise ArithmeticError(f"corrected amplitude has imaginary part {corrected.imag:.3g}")
    return corrected.real


# --- fidelities --------------------------------------------------------------


def _check_amplitude(psi_N) -> complex:
    psi_N = complex(psi_N)
    if abs(psi_N) > 1 + AMPLITUDE_TOL:
        raise InvalidAmplitude(f"|psi_N| = {abs(psi_N)!r} exceeds 1")
    return psi_N


def reduced_state(qubit: QubitState, psi_N) -> np.ndarray:
    """2x2 density matrix of the last site after the transfer."""
    psi = _check_amplitude(psi_N)
    a, b = qubit.alpha, qubit.beta
    aa, bb = abs(a) ** 2, abs(b) ** 2
    m2 = abs(psi) ** 2
    return np.array([
        [aa + bb * (1 - m2), a * np.conj(b) * np.conj(psi)],
        [np.conj(a) * b * psi, bb * m2],
    ], dtype=complex)


def fidelity_for_input(qubit: QubitState, psi_N) -> float:
    psi = _check_amplitude(psi_N)
    aa, bb = abs(qubit.alpha) ** 2, abs(qubit.beta) ** 2
    return aa + 2 * aa * bb * psi.real + bb * (bb - aa) * abs(psi) ** 2


def input_averaged_fidelity(psi_N) -> float:
    """Fidelity averaged uniformly over the Bloch sphere of input states."""
    psi = _check_amplitude(psi_N)
    return 0.5 + abs(psi) ** 2 / 6 + psi.real / 3
