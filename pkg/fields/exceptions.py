class FieldsError(Exception):
    """Base class for grid, trace and profile errors"""


class GridError(FieldsError, ValueError):
    """Invalid grid specification"""


class GridMismatch(FieldsError, ValueError):
    """Profiles that must share a grid do not"""


class TraceError(FieldsError, ValueError):
    """Spherical trace could not be built or is not finite"""


class DumpFormatError(FieldsError):
    """SSVF1 file is malformed"""
