"""Exception hierarchy shared by all modules."""


class BandDiffError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""

    exit_code = 3


class ConfigError(BandDiffError, ValueError):
    """Invalid lattice, ensemble or run configuration."""

    exit_code = 2


class DimensionMismatch(BandDiffError, ValueError):
    exit_code = 2


class DomainError(BandDiffError, ValueError):
    """Argument outside the mathematical domain (e.g. T <= 0)."""

    exit_code = 2


class DegenerateBandError(DomainError):
    """M = 1: the entry variance 1/(M-1) is undefined."""


class OverflowGuardError(BandDiffError):
    """Special-function argument outside the supported range."""


class SpectralRangeError(BandDiffError):
    """Chebyshev recursion diverged: spectrum of H/2 escaped [-1, 1]."""


class CapExceeded(BandDiffError):
    """Exhaustive computation refused because the instance is too large."""

    exit_code = 4

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class SampleFailure(BandDiffError):
    """A Monte Carlo sample failed; carries the failing sample index."""

    def __init__(self, index, cause):
        super().__init__(f"sample {index} failed: {cause}")
        self.index = index
        self.cause = cause
