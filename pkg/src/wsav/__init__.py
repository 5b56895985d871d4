"""Weighted scalar-auxiliary-variable solvers for phase-field gradient flows."""

__version__ = "0.1.0"

from .errors import ConfigurationError, GridMismatchError, LambdaSearchError, OutputError, StepFailure
from .grid import Grid, RealField, SpectralOperators, make_operators
from .potential import EnergySplit, PotentialParams
from .scalar import BE, CN, RootOptions, RootResult, ScalarEquation
from .steppers import LambdaPolicy, SavState, StepParams, StepReport, be_step, cn_step, init_state, run

__all__ = [
    "BE",
    "CN",
    "ConfigurationError",
    "EnergySplit",
    "Grid",
    "GridMismatchError",
    "LambdaPolicy",
    "LambdaSearchError",
    "OutputError",
    "PotentialParams",
    "RealField",
    "RootOptions",
    "RootResult",
    "SavState",
    "ScalarEquation",
    "SpectralOperators",
    "StepFailure",
    "StepParams",
    "StepReport",
    "be_step",
    "cn_step",
    "init_state",
    "make_operators",
    "run",
]
