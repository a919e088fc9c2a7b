"""Exception hierarchy shared across the package."""


class VDMError(Exception):
    """Base class for all errors raised by vdmeval."""


class DomainError(VDMError, ValueError):
    """An argument lies outside the domain of a function."""


class ConstraintError(VDMError, ValueError):
    """A parameter vector violates its model's arity or constraints."""


class SampleTooShortError(VDMError, ValueError):
    pass


class IngestError(VDMError):
    pass


class RecordParseError(IngestError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        self.message = message
        super().__init__(f"{self.path}:{line}: {message}")


class DuplicateRecordError(IngestError):
    pass


class UnknownSourceError(IngestError):
    pass


class MissingReleaseDateError(IngestError):
    pass


class HorizonError(VDMError, ValueError):
    """Horizon below the minimum of six months."""


class FitError(VDMError):
    """Every multistart run of the fitter diverged."""


class UntestableError(VDMError):
    """The chi-square test cannot be applied (no month with E_t >= 5)."""


class EmptyInputError(VDMError, ValueError):
    pass


class InsufficientDataError(VDMError):
    pass
