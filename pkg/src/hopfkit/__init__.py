"""Numerical verification of Hopf bifurcation hypotheses and branch computation
for semilinear evolution equations, via an extended-system formulation."""

from .errors import (
    ConfigError,
    ConvergenceError,
    DegeneracyError,
    DomainError,
    HopfkitError,
    NoMatchError,
    NumericError,
    PoleError,
    SetupError,
    SpectrumProximityError,
    WrongEigenvalueError,
)
from .problems import (
    EvolutionProblem,
    Example1Config,
    Example2Config,
    build_problem,
    ex1_build,
    ex2_build,
    exact_branch,
    prepare_bordering,
)
from .spacetime import SpaceTimeField
from .states import BranchPoint, ExtendedState

__version__ = "0.1.0"
