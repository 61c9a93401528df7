"""Quantum diffusion in random band matrices: lattices, ensembles, Chebyshev
propagation, transition profiles, eigenvector localisation and the
combinatorics of the graphical path expansion."""
from ._accel import backend
from .ensemble import BandMatrix, EnsembleKind, sample
from .errors import (BandDiffError, CapExceeded, ConfigError, DegenerateBandError,
                     DimensionMismatch, DomainError, OverflowGuardError, SampleFailure,
                     SpectralRangeError)
from .lattice import LatticeConfig

__version__ = "0.1.0"

__all__ = [
    "BandDiffError", "BandMatrix", "CapExceeded", "ConfigError", "DegenerateBandError",
    "DimensionMismatch", "DomainError", "EnsembleKind", "LatticeConfig", "OverflowGuardError",
    "SampleFailure", "SpectralRangeError", "backend", "sample", "__version__",
]
