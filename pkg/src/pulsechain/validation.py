"""Cross-checks between the independent computation routes.

Each check returns a :class:`CheckResult` with the measured deviation and the
tolerance it was held to.  ``informational`` results carry numbers worth
reporting but are never counted as failures.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analytic, chain, diamond, enumeration
from .chain import ChainSpec, NoiseRealization
from .montecarlo import estimate
from .noise import IndependentUniformModel, ThreeValueCorrelatedModel


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""
    informational: bool = False

    def line(self) -> str:
        if self.informational:
            return f"INFO {self.name}: {self.detail}"
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name}: measured {self.measured:.3e} (tolerance {self.tolerance:.1e})"
        return f"{text}; {self.detail}" if self.detail else text


def _random_noise(rng, K, width=0.3):
    return NoiseRealization(rng.uniform(-width, width, K + 2), rng.uniform(-width, width, K + 1))


def block_structure_deviation(K: int, times=(0.0, 0.37, 1.1, 2.9)) -> float:
    """Largest deviation of ``V exp(-itH) V^T`` from the virtual-chain block unitary."""
    lattice = diamond.build_lattice(K)
    V = diamond.basis_change(lattice)
    spec = ChainSpec(K)
    worst = 0.0
    for t in times:
        conj = V @ diamond.exact_evolution(lattice, t) @ V.T
        worst = max(worst, float(np.max(np.abs(conj - chain.segment_unitary(spec, t)))))
    return worst


def propagation_deviation(K: int, n: int, seed: int) -> float:
    """Largest mismatch between lattice and virtual-chain propagation over random draws."""
    rng = np.random.default_rng(seed)
    lattice = diamond.build_lattice(K)
    V = diamond.basis_change(lattice)
    spec = ChainSpec(K)
    worst = 0.0
    for _ in range(n):
        noise = _random_noise(rng, K)
        init = rng.normal(size=spec.N) + 1j * rng.normal(size=spec.N)
        init /= np.linalg.norm(init)
        lat = diamond.oracle_propagate(lattice, noise, init)
        virt = chain.propagate(spec, noise, V @ init)
        worst = max(worst, float(np.max(np.abs(V @ lat - virt))))
    return worst


def product_formula_deviation(K: int, n: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    spec = ChainSpec(K)
    worst = 0.0
    for _ in range(n):
        noise = _random_noise(rng, K)
        worst = max(worst, abs(chain.last_amplitude(spec, noise) - chain.product_amplitude(spec, noise)))
    return worst


def enumeration_deviation(max_length: int = 5,
                          params=((0.5, 0.3, 0.4), (0.2, 0.1, 0.9), (1.0, 0.5, 0.0), (0.7, 0.25, 1.0))) -> float:
    """Transfer-matrix moments against brute-force sums over all sequences up to ``max_length``."""
    worst = 0.0
    for eps, p, q in params:
        for length in range(1, max_length + 1):
            K = length - 1
            for kind in ("cos", "cos2"):
                d = (analytic.correlated_pulse_moment(kind, eps, p, q, K)
                     - enumeration.enumerate_pulse_moment(kind, eps, p, q, K))
                worst = max(worst, abs(d))
            if length >= 2:
                K = length - 2
                for kind in ("linear", "squared"):
                    d = (analytic.correlated_time_moment(kind, eps, p, q, K)
                         - enumeration.enumerate_time_moment(kind, eps, p, q, K))
                    worst = max(worst, abs(d))
    return worst


def run_checks(samples: int = 50_000, seed: int = 0, workers: int | None = None) -> list[CheckResult]:
    results = []

    dev = max(block_structure_deviation(K) for K in range(4))
    results.append(CheckResult("diamond block structure (K=0..3)", dev < 1e-10, dev, 1e-10))

    dev = max(propagation_deviation(K, 100, seed + K) for K in range(4))
    results.append(CheckResult("diamond vs virtual propagation (K=0..3, 100 draws)",
                               dev < 1e-10, dev, 1e-10))

    dev = max(product_formula_deviation(K, 200, seed + K) for K in (0, 1, 2, 5, 20))
    results.append(CheckResult("product formula vs propagation", dev < 1e-10, dev, 1e-10))

    dev = enumeration_deviation()
    results.append(CheckResult("transfer matrix vs enumeration (length<=5)", dev < 1e-14, dev, 1e-14))

    spec = ChainSpec(20)
    est = estimate(spec, IndependentUniformModel(0.02, 0.02), samples, seed, workers=workers)
    ref = analytic.independent_moments(0.02, 0.02, 20)
    z = max(abs(est.mean_psi - ref.mean_psi) / est.se_psi,
            abs(est.mean_sq_psi - ref.mean_sq_psi) / est.se_sq_psi)
    results.append(CheckResult("Monte Carlo vs independent closed form (eps=0.02, K=20)",
                               z < 3, z, 3.0, f"{samples} samples, deviation in standard errors"))

    spec = ChainSpec(100)
    est = estimate(spec, ThreeValueCorrelatedModel(0.5, 0.3, 1.0), samples, seed, workers=workers)
    ref = analytic.closed_form_q1_pulse(0.5, 0.3, 100)
    z = abs(est.mean_F - ref) / est.se_F
    results.append(CheckResult("Monte Carlo vs fully correlated pulse closed form (K=100)",
                               z < 3, z, 3.0, "deviation in standard errors"))

    for eps, p in ((0.1, 0.2), (0.3, 0.5)):
        ours = analytic.correlated_fidelity("times", eps, p, 1.0, 10)
        printed = analytic.printed_q1_time(eps, p)
        results.append(CheckResult(
            f"fully correlated timing noise eps={eps} p={p}", True, abs(ours - printed), 0.0,
            f"transfer matrix {ours!r}, printed expression {printed!r}", informational=True))
    eps, p, K = 0.5, 0.3, 10
    results.append(CheckResult(
        "uncorrelated pulse closed form", True, 0.0, 0.0,
        f"eps={eps} p={p} K={K}: transfer matrix "
        f"{analytic.correlated_fidelity('pulses', eps, p, 0.0, K)!r}, corrected "
        f"{analytic.closed_form_q0_pulse(eps, p, K)!r}, printed "
        f"{analytic.closed_form_q0_pulse(eps, p, K, paper_verbatim=True)!r}",
        informational=True))
    return results
