"""Finite-difference solvers for the one-dimensional Dirac equation."""
from .core import (
    FREE,
    PAULI,
    Discretization,
    InitialData,
    PotentialSpec,
    build_grid,
    sample_initial,
)
from .observables import ErrorTriple, error_metrics, observe
from .reference import ReferenceConfig, reference_solve
from .schemes import EvolutionResult, SchemeKind, evolve
from .stability import StabilityReport, amplification_spectrum, tau_max

__all__ = [
    "FREE",
    "PAULI",
    "Discretization",
    "InitialData",
    "PotentialSpec",
    "build_grid",
    "sample_initial",
    "ErrorTriple",
    "error_metrics",
    "observe",
    "ReferenceConfig",
    "reference_solve",
    "EvolutionResult",
    "SchemeKind",
    "evolve",
    "StabilityReport",
    "amplification_spectrum",
    "tau_max",
]
