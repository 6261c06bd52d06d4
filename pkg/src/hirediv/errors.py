"""Exception hierarchy shared by every module."""


class HireDivError(Exception):
    """Base class for all package errors."""


class DomainError(HireDivError, ValueError):
    """An argument lies outside the domain of the operation."""


class ModelError(HireDivError, ValueError):
    """A correlation structure is not positive semi-definite."""


class DegenerateError(HireDivError, ArithmeticError):
    """A ratio or entropy is undefined in the requested region."""


class FeasibilityError(HireDivError, ValueError):
    """A selection constraint cannot be met by the available population."""

    def __init__(self, message: str, group: str | None = None):
        super().__init__(message)
        self.group = group


class NoSolutionError(HireDivError, ValueError):
    """An equation has no real solution for the given inputs."""


class CollinearityError(HireDivError, ValueError):
    """The design matrix does not have full column rank."""


class SchemaError(HireDivError, ValueError):
    """An input file does not conform to its declared schema."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
