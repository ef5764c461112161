"""Weighted energy-dissipation solver for doubly-nonlinear flows with
nonpotential perturbations."""

from .errors import WedflowError
from .fixed_point import FixedPointConfig, solve_regularized
from .moreau_yosida import YosidaConfig, moreau_envelope, resolvent, yosida_gradient
from .spaces import DiscreteSpace, duality_map
from .wed import TimeGrid, Trajectory, WedProblem, minimize_wed, wed_gradient, wed_value

__all__ = [
    "DiscreteSpace",
    "FixedPointConfig",
    "TimeGrid",
    "Trajectory",
    "WedProblem",
    "WedflowError",
    "YosidaConfig",
    "duality_map",
    "minimize_wed",
    "moreau_envelope",
    "resolvent",
    "solve_regularized",
    "wed_gradient",
    "wed_value",
    "yosida_gradient",
]
