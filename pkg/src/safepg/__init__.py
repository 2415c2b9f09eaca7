"""Safe lifelong policy-gradient learning.

Consecutive control tasks share a latent basis; per-round updates use
closed-form Gaussian policy-gradient solutions; safety constraints are
enforced by projecting the shared knowledge through small semidefinite and
second-order cone programs; regret against a hindsight comparator is tracked
and checked for sublinear growth.
"""

__version__ = "0.1.0"

from . import dynamics, lifelong, policy, projection, regret
from .errors import (ConfigError, ContractViolation, DivergedTrajectory,
                     InfeasibleConstraint, InvariantViolation, NumericalFailure,
                     SafePGError)

__all__ = [
    "dynamics", "lifelong", "policy", "projection", "regret",
    "ConfigError", "ContractViolation", "DivergedTrajectory",
    "InfeasibleConstraint", "InvariantViolation", "NumericalFailure",
    "SafePGError",
]
