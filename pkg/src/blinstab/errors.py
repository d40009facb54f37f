"""Exception types shared across the package, mapped to CLI exit codes."""


class BlinstabError(Exception):
    exit_code = 3


class ConfigError(BlinstabError, ValueError):
    """Invalid configuration; ``field`` is the dotted path of the bad entry."""

    exit_code = 2

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DomainError(BlinstabError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 2


class ProfileEvaluationError(BlinstabError, ArithmeticError):
    def __init__(self, z: float, k: int = 0):
        self.z = z
        super().__init__(f"non-finite derivative of order {k} at z = {z!r}")


class UsageError(BlinstabError, ValueError):
    exit_code = 2


class UnderResolvedError(BlinstabError):
    """Grid too coarse for the sublayer; ``required_N`` is a suggested size."""

    def __init__(self, message: str, required_N: int):
        self.required_N = required_N
        super().__init__(f"{message} (try N >= {required_N})")


class NumericalFailure(BlinstabError):
    exit_code = 3


class AssertionFailure(BlinstabError, AssertionError):
    exit_code = 1
