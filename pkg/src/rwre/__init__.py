"""Random walks in doubly stochastic random environments on periodic tori.

Simulation, spectral infrared diagnostics, stream-tensor constructions and
exact effective-diffusivity verification at desk scale.
"""

__version__ = "0.1.0"

from .environment import (Environment, RateDecomposition, ValidationReport,
                          validate, decompose, mean_drift,
                          save_environment, load_environment)
from .generators import GeneratorSpec, generate

__all__ = [
    "Environment", "RateDecomposition", "ValidationReport",
    "validate", "decompose", "mean_drift",
    "save_environment", "load_environment",
    "GeneratorSpec", "generate",
    "__version__",
]
