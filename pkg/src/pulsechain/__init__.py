"""Pulsed single-excitation transfer along diamond chains under noisy control."""
from .chain import ChainSpec, NoiseRealization, QubitState
from .noise import IndependentUniformModel, ThreeValueCorrelatedModel

__all__ = [
    "ChainSpec",
    "NoiseRealization",
    "QubitState",
    "IndependentUniformModel",
    "ThreeValueCorrelatedModel",
]
