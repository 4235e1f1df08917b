"""Exception types shared across the package."""


class SmoothgcError(Exception):
    """Base class for all package errors."""


class DataFormatError(SmoothgcError):
    """Malformed dataset or report file."""


class ConfigError(SmoothgcError):
    """Invalid or unknown configuration key/value."""


class CollapseError(SmoothgcError):
    """Representations collapsed (zero inter-cluster separation); training aborted."""


class ConvergenceError(SmoothgcError):
    """Iterative eigensolver failed its residual/orthogonality checks."""


class SingletonClusterError(SmoothgcError):
    """Per-node tightness is undefined for a single-member cluster."""
