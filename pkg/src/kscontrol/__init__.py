"""Distributed null controls for a one-dimensional chemotaxis system.

Modules: ``mesh`` (grid and discrete calculus), ``weights`` (Carleman weights),
``trajectory`` (free solution), ``linear_pde`` (linearized system and exact
adjoint), ``hum`` (penalized control by CG), ``nonlinear`` (fixed-point loop),
``cole_hopf`` (logarithmic transform), ``audit`` (inequality probes), ``cli``.
"""

from .errors import (ConstructionError, ConvergenceError, DimensionError, DivergenceError,
                     DomainError, HypothesisError, KSControlError, ParameterError, StabilityError)
from .mesh import Mesh1D, gradient, inner, laplacian, norm

__all__ = [
    "Mesh1D", "laplacian", "gradient", "inner", "norm",
    "KSControlError", "DimensionError", "DomainError", "ConstructionError", "ParameterError",
    "HypothesisError", "StabilityError", "DivergenceError", "ConvergenceError",
]
__version__ = "0.1.0"
