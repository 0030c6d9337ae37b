"""Full-lattice model of the diamond chain.

An independent check on the virtual-chain decomposition: the single-excitation
Hamiltonian is built directly from the lattice bonds and exponentiated by a
dense symmetric eigendecomposition.  Only meant for small chains (K <= 10).

Site conventions (1-based): apexes sit at ``3i + 1``; in each diamond the
upper site ``a + 1`` couples with +1 to both neighbouring apexes and the
lower site ``a + 2`` couples with +1 to its left apex and -1 to its right one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import chain
from .chain import ChainSpec, NoiseRealization
from .errors import EigenFailure


@dataclass(frozen=True)
class DiamondLattice:
    K: int
    edges: tuple[tuple[int, int, int], ...]

    @property
    def N(self) -> int:
        return 3 * self.K + 4

    @property
    def spec(self) -> ChainSpec:
        return ChainSpec(self.K)

    @property
    def apex_sites(self) -> list[int]:
        return [3 * i + 1 for i in range(self.K + 2)]

    @property
    def pair_sites(self) -> list[tuple[int, int]]:
        """``(upper, lower)`` site pairs of every diamond."""
        return [(3 * i + 2, 3 * i + 3) for i in range(self.K + 1)]

    def hamiltonian(self) -> np.ndarray:
        H = np.zeros((self.N, self.N))
        for m, n, c in self.edges:
            H[m - 1, n - 1] = H[n - 1, m - 1] = c
        return H


def build_lattice(K: int) -> DiamondLattice:
    if K < 0:
        raise ValueError("K must be nonnegative")
    edges = []
    for i in range(K + 1):
        a = 3 * i + 1
        edges += [(a, a + 1, 1), (a, a + 2, 1), (a + 1, a + 3, 1), (a + 2, a + 3, -1)]
    return DiamondLattice(K, tuple(edges))


def basis_change(lattice: DiamondLattice) -> np.ndarray:
    """Orthogonal V with ``V @ diamond_vector = virtual_vector``.

    Apexes map to themselves, each (upper, lower) pair to its symmetric and
    antisymmetric combinations.
    """
    V = np.zeros((lattice.N, lattice.N))
    for a in lattice.apex_sites:
        V[a - 1, a - 1] = 1.0
    r = 1 / np.sqrt(2)
    for u, l in lattice.pair_sites:
        V[u - 1, [u - 1, l - 1]] = r, r
        V[l - 1, [u - 1, l - 1]] = r, -r
    return V


def _eigh(H):
    try:
        return np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc


def exact_evolution(lattice: DiamondLattice, t: float) -> np.ndarray:
    """``exp(-i t H)`` on the single-excitation sector of the full lattice."""
    w, Q = _eigh(lattice.hamiltonian())
    return (Q * np.exp(-1j * t * w)) @ Q.T


def pulse_in_diamond_basis(lattice: DiamondLattice, theta) -> np.ndarray:
    """The virtual-chain pulse layer expressed on lattice sites, ``V^T P V``."""
    V = basis_change(lattice)
    return V.T @ chain.pulse_layer(lattice.spec, theta) @ V


def oracle_propagate(lattice: DiamondLattice, noise: NoiseRealization,
                     initial: np.ndarray) -> np.ndarray:
    """Protocol evolution with dense lattice operators; ``initial`` is in lattice sites."""
    spec = lattice.spec
    schedule = chain.noisy_schedule(spec, noise)
    w, Q = _eigh(lattice.hamiltonian())

    def evolve(x, t):
        return Q @ (np.exp(-1j * t * w) * (Q.T @ x))

    x = evolve(np.asarray(initial, dtype=complex), schedule.durations[0])
    for j, theta in enumerate(noise.theta):
        x = pulse_in_diamond_basis(lattice, theta) @ x
        x = evolve(x, schedule.durations[j + 1])
    return x
