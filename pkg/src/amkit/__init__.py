"""Dense associative memory toolkit: energies, dynamics, capacity and experiments."""
from ._backend import NAME as BACKEND
from .core import PatternMatrix, make_rng, sample_binary_patterns
from .dynamics import DescentConfig, descend, retrieve
from .energies import EnergySpec, chn_spec, lse_spec, lsr_spec, scaled_gaussian_spec
from .errors import (AmkitError, ApproximationBreakdownError, DimensionError, InfiniteEnergyError,
                     InsufficientDataError, StepSizeError, ValidationError)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "PatternMatrix", "make_rng", "sample_binary_patterns", "DescentConfig", "descend", "retrieve",
    "EnergySpec", "chn_spec", "lse_spec", "lsr_spec", "scaled_gaussian_spec", "AmkitError",
    "ApproximationBreakdownError", "DimensionError", "InfiniteEnergyError", "InsufficientDataError",
    "StepSizeError", "ValidationError", "__version__",
]
