"""Switching-environment M/M/1 queue: exact results, diffusion approximation, simulation."""

from . import diffusion, fpt_discrete, numerics, simulator, steady_state, transient
from .errors import (
    ConfluentRootsError,
    ConvergenceError,
    CubicRootError,
    RegimeError,
    SpecError,
    SwitchqError,
)
from .model import DiffusionSpec, QueueSpec, StabilityCase, classify, scale_to_discrete, validate
from .simulator import EmpiricalEstimate, SimConfig
from .steady_state import solve_steady
from .diffusion import solve_steady_density

__all__ = [
    "ConfluentRootsError", "ConvergenceError", "CubicRootError", "DiffusionSpec",
    "EmpiricalEstimate", "QueueSpec", "RegimeError", "SimConfig", "SpecError",
    "StabilityCase", "SwitchqError", "classify", "diffusion", "fpt_discrete", "numerics",
    "scale_to_discrete", "simulator", "solve_steady", "solve_steady_density",
    "steady_state", "transient", "validate",
]
