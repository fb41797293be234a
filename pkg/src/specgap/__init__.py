"""Desk-scale toolkit for tiling, history-state and spectral-combination Hamiltonians."""

from .errors import (ConvergenceError, DomainError, MalformedInputError, ResourceGuardError,
                     SpecgapError, ValidationError)
from .spectra import LocalHamiltonian, SparseHermitian, SpectrumResult

__all__ = ["ConvergenceError", "DomainError", "MalformedInputError", "ResourceGuardError",
           "SpecgapError", "ValidationError", "LocalHamiltonian", "SparseHermitian",
           "SpectrumResult"]
__version__ = "0.1.0"
