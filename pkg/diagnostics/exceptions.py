class DiagnosticsError(Exception):
    """Base class for diagnostics failures"""


class CylinderOutOfRange(DiagnosticsError):
    """A parabolic cylinder reaches outside the sampled space-time region"""


class SupportViolation(DiagnosticsError):
    """A test function is not supported inside the sampled region"""


class InsufficientShells(DiagnosticsError):
    """Too few populated shells for a decay fit"""


class InvalidExponent(DiagnosticsError):
    """An integrability exponent outside the admissible range"""


class NonFiniteReport(DiagnosticsError):
    """A report entry is NaN or infinite"""
