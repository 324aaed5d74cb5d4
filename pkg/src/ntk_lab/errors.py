"""Exception hierarchy shared across the package.

Numerical failures subclass :class:`NumericalError` so the CLI can map them to
exit code 3; configuration problems subclass :class:`ConfigError` (exit code 2).
"""


class NtkLabError(Exception):
    pass


class NumericalError(NtkLabError):
    pass


class ConfigError(NtkLabError):
    pass


class NonFinite(NumericalError, ValueError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class DomainError(NtkLabError, ValueError):
    pass


class DimensionMismatch(NtkLabError, ValueError):
    pass


class LengthMismatch(NtkLabError, ValueError):
    pass


class AtNode(NtkLabError, ValueError):
    pass


class DuplicatePoints(NumericalError, ValueError):
    pass


class NotSorted(NtkLabError, ValueError):
    pass


class TooSmall(NtkLabError, ValueError):
    pass


class BracketFailure(NumericalError):
    pass


class OutOfRange(NtkLabError, ValueError):
    pass


class MissingRng(NtkLabError, ValueError):
    pass


class DivergenceDetected(NumericalError):
    pass


class MissingSnapshot(NtkLabError, KeyError):
    pass


class UnknownTruth(ConfigError, KeyError):
    pass


class UnknownScenario(ConfigError, KeyError):
    pass


class ConfigParse(ConfigError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidConfig(ConfigError, ValueError):
    pass
