"""Numerical verification of sharp Hardy constants in the cone R^{n-k} x (R_+)^k."""

from hardylab.cone import (
    AngularEigenfunction,
    ConeSpec,
    SharpConstants,
    angular_eigenfunction,
    degree_eigenvalue,
    hardy_constant,
    iterated_log,
    principal_eigenvalue,
    sphere_volume,
    weighted_halfspace_constant,
)
from hardylab.errors import (
    AccuracyError,
    CapabilityError,
    ConvergenceError,
    DegenerateTrialError,
    DomainError,
    EvaluationError,
    HardyLabError,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "AngularEigenfunction",
    "CapabilityError",
    "ConeSpec",
    "ConvergenceError",
    "DegenerateTrialError",
    "DomainError",
    "EvaluationError",
    "HardyLabError",
    "SharpConstants",
    "angular_eigenfunction",
    "degree_eigenvalue",
    "hardy_constant",
    "iterated_log",
    "principal_eigenvalue",
    "sphere_volume",
    "weighted_halfspace_constant",
]
