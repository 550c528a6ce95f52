"""Random hysteresis of the mean-field Ising magnet under a slowly oscillating field."""
from .errors import (ConfigError, DomainError, MfhystError, NumericalError, RangeError,
                     ResourceError, StatisticalError)
from .model import BranchSet, ModelParams, branches, drift_F, free_energy, lam, make_params, oscillating_field
from .outcome import Outcome, Tag

__version__ = "0.1.0"

__all__ = [
    "BranchSet", "ConfigError", "DomainError", "MfhystError", "ModelParams", "NumericalError",
    "Outcome", "RangeError", "ResourceError", "StatisticalError", "Tag", "branches", "drift_F",
    "free_energy", "lam", "make_params", "oscillating_field",
]
