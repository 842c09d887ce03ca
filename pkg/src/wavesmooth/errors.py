"""Exception taxonomy shared across the package.

CLI exit codes: ConfigurationError -> 2, NumericDegeneracyError -> 3.
"""


class WavesmoothError(Exception):
    """Base class for package errors."""


class ConfigurationError(WavesmoothError):
    """Invalid user-supplied configuration (bad order, range, file...)."""


class AssumptionViolation(ConfigurationError):
    """The chosen wavelet does not satisfy the zero-free-interval
    assumption needed for the test constants (e.g. Haar)."""


class NumericDegeneracyError(WavesmoothError):
    """A quantity required by the computation is degenerate
    (zero detail energy, insufficient sample, ...)."""


class InternalError(WavesmoothError):
    """Invariant broken inside the package; carries diagnostics."""
