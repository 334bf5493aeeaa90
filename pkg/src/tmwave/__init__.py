"""P2 finite elements for 1D wave equations with space-time varying coefficients.

Modules: ``linalg`` (banded symmetric solvers), ``fem1d`` (mesh, space,
assembly), ``coefficients`` (material models), ``stepping`` (leapfrog and
leapfrog/Crank-Nicolson), ``projection`` (time-dependent Ritz-like projection),
``analysis`` (errors, rates, energy) and ``cli``.
"""

from tmwave.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
