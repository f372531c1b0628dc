"""Extremum seeking with saturating actuators: robust LMI gain design, simulation and checks."""

from .core_model import PlantSpec, PolytopicHessian, SimplexWeight, deadzone, hessian_at, map_eval, saturate
from .dither import DitherSpec, common_period, validate_frequencies
from .exceptions import (
    CrossValidationError,
    DivergenceError,
    InputError,
    SatseekError,
    SolverError,
    SynthesisError,
)
from .lmi import Certificate, check_analysis, check_inclusion, solve_analysis, solve_synthesis
from .simulate import SimConfig, SimTrace, simulate_average, simulate_full

__version__ = "0.1.0"

__all__ = [
    "Certificate", "CrossValidationError", "DitherSpec", "DivergenceError", "InputError",
    "PlantSpec", "PolytopicHessian", "SatseekError", "SimConfig", "SimTrace", "SimplexWeight",
    "SolverError", "SynthesisError", "check_analysis", "check_inclusion", "common_period",
    "deadzone", "hessian_at", "map_eval", "saturate", "simulate_average", "simulate_full",
    "solve_analysis", "solve_synthesis", "validate_frequencies",
]
