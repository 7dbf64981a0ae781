"""Exception hierarchy."""


class RampedGateError(Exception):
    """Base class for all package errors."""


class DimensionError(RampedGateError):
    """Invalid or mismatched Hilbert-space dimensions."""


class TruncationError(RampedGateError):
    """State does not fit in the truncated Fock space."""


class ScheduleError(RampedGateError):
    """Inconsistent pulse-schedule durations or parameters."""


class IntegrationError(RampedGateError):
    """Propagation failure (step underflow, norm drift)."""


class QuadratureError(RampedGateError):
    """Adaptive quadrature failed to converge."""


class CalibrationError(RampedGateError):
    """Calibration bracket or fit failure."""


class ConfigError(RampedGateError):
    """Invalid run configuration."""
