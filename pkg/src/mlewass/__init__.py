"""Wasserstein-distance bounds for the normal approximation of MLEs."""
from .errors import (
    CapacityError,
    ContractError,
    DegenerateDataError,
    DomainError,
    EvaluationError,
    NotPSDError,
    SingularError,
    SupportError,
)
from .rng_dist import RandomStream, derive_stream

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ContractError",
    "DegenerateDataError",
    "DomainError",
    "EvaluationError",
    "NotPSDError",
    "RandomStream",
    "SingularError",
    "SupportError",
    "derive_stream",
]
