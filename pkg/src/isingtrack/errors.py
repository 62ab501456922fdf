"""Exception hierarchy shared by the library and the command-line front-end.

Each family maps onto one CLI exit code, so callers can catch the broad class
without caring which module raised it.
"""


class IsingTrackError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ConfigError(IsingTrackError, ValueError):
    exit_code = 2


class DataError(IsingTrackError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class EventParseError(DataError):
    def __init__(self, message, *, path=None, line=None, field=None):
        self.path = path
        self.line = line
        self.field = field
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = ", ".join(where) + ": " if where else ""
        super().__init__(prefix + message)


class DuplicateHitError(DataError):
    pass


class GeometryMismatchError(DataError):
    pass


class MissingTruthError(DataError):
    pass


class DegenerateBatchError(DataError):
    """Raised when no event of a calibration batch has a usable gap."""


class NumericalError(IsingTrackError, ArithmeticError):
    exit_code = 4


class SingularMatrixError(NumericalError):
    pass


class SpectrumError(NumericalError):
    """Eigenvalue that cannot be encoded by the phase-estimation register."""


class PostSelectionError(NumericalError):
    pass


class SizeError(IsingTrackError, ValueError):
    exit_code = 4
