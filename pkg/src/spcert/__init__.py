"""spcert: implicit solver plus empirical certification suite for singular
parabolic diffusion equations (gradient-singular and doubly nonlinear)."""

__version__ = "0.1.0"

from .core_model import (Cylinder, Grid, IntrinsicCylinderSpec, ProblemParams,
                         SpaceTimeField, intrinsic_cylinder, unit_ball_measure,
                         validate_params)
from .solver import SolveResult, SolverConfig, solve

__all__ = [
    "Cylinder", "Grid", "IntrinsicCylinderSpec", "ProblemParams",
    "SpaceTimeField", "intrinsic_cylinder", "unit_ball_measure",
    "validate_params", "SolveResult", "SolverConfig", "solve",
    "__version__",
]
