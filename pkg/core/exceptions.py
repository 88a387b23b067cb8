from caloric.exceptions import CaloricQuadratureError
from diagnostics.exceptions import DiagnosticsError
from evolver.exceptions import EvolverError
from profiles.exceptions import ContinuationStalled, SolverError
from stokes.exceptions import DuhamelQuadratureError


class ConfigError(Exception):
    """Base class for run configuration errors"""
    exit_code = 1

    def __init__(self, message, key=None, line=None):
        where = ''
        if key:
            where = f'{key}' + (f' (line {line})' if line else '')
        super().__init__(f'{where}: {message}' if where else message)
        self.key = key
        self.line = line


class MissingKey(ConfigError):
    exit_code = 2


class BadValue(ConfigError):
    exit_code = 3


class UnreadableConfig(ConfigError):
    """The config file (or an artifact it points at) cannot be read"""
    exit_code = 4


class AcceptanceFailed(DiagnosticsError):
    """verify finished but at least one diagnostic missed its threshold"""

    def __init__(self, message, failed=()):
        super().__init__(message)
        self.failed = tuple(failed)


# Most specific first
EXIT_CODES = (
    (ContinuationStalled, 6),
    (SolverError, 5),
    (CaloricQuadratureError, 7),
    (DuhamelQuadratureError, 7),
    (EvolverError, 8),
    (DiagnosticsError, 9),
)


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return exc.exit_code
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return 1
