"""Brute-force expectations over all three-value noise sequences.

Independent of the transfer-matrix code in :mod:`pulsechain.analytic`: joint
weights come straight from the one-step conditional law and the amplitude
factors from the product formula in :mod:`pulsechain.chain`.
"""
from __future__ import annotations

import itertools

import numpy as np

from .chain import pulse_factor, time_factor


def sequences(length: int) -> np.ndarray:
    """All ``3**length`` state-index sequences (0: +eps, 1: 0, 2: -eps), one per row."""
    return np.array(list(itertools.product(range(3), repeat=length)), dtype=int)


def joint_weights(states: np.ndarray, p: float, q: float) -> np.ndarray:
    marginal = np.array([p, 1 - 2 * p, p])
    w = marginal[states[:, 0]]
    for j in range(1, states.shape[1]):
        same = states[:, j] == states[:, j - 1]
        w = w * (q * same + (1 - q) * marginal[states[:, j]])
    return w


def _values(states, eps):
    return np.array([eps, 0.0, -eps])[states]


def enumerate_pulse_moment(kind: str, eps: float, p: float, q: float, K: int) -> float:
    states = sequences(K + 1)
    chi = pulse_factor(_values(states, eps))
    vals = chi if kind == "cos" else chi ** 2
    return float(np.sum(joint_weights(states, p, q) * vals))


def enumerate_time_moment(kind: str, eps: float, p: float, q: float, K: int) -> float:
    states = sequences(K + 2)
    phi = time_factor(_values(states, eps))
    vals = phi if kind == "linear" else phi ** 2
    return float(np.sum(joint_weights(states, p, q) * vals))
