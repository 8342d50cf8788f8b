"""Exception hierarchy shared by every vwdlab module."""


class VwdError(Exception):
    """Base class for all errors raised by vwdlab."""


class ParseError(VwdError, ValueError):
    """A manifest or flow file could not be parsed.

    ``line`` and ``column`` are 1-based when known.
    """

    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class DuplicatePatient(VwdError, ValueError):
    pass


class MissingFlowFile(VwdError, FileNotFoundError):
    pass


class EmptySeries(VwdError, ValueError):
    pass


class ConfigInvalid(VwdError, ValueError):
    pass


class ImaginaryResidueExceeded(VwdError, ArithmeticError):
    """Inverse transform left a non-negligible imaginary part (asymmetric spectrum)."""


class DegenerateMorphology(VwdError, ValueError):
    """Breath (or window of breaths) has no usable inspiratory/expiratory structure."""


class SingleClassTraining(VwdError, ValueError):
    pass


class DimensionMismatch(VwdError, ValueError):
    pass


class ShapeMismatch(VwdError, ValueError):
    pass


class BatchTooSmall(VwdError, ValueError):
    pass


class StaleCache(VwdError, RuntimeError):
    pass


class DivergenceDetected(VwdError, ArithmeticError):
    pass


class InsufficientSamples(VwdError, ValueError):
    pass


class UnbalancedCohort(VwdError, ValueError):
    pass


class EmptySide(VwdError, ValueError):
    pass


class SingleClass(VwdError, ValueError):
    pass


class NoWindows(VwdError, ValueError):
    pass


class PartialFoldFailure(VwdError, RuntimeError):
    """A (trial, fold) cell could not be evaluated; the fold is recorded as invalid."""
