"""Exception hierarchy.

Each class carries the CLI exit code of its class: parse errors exit 2,
dimension/config errors exit 3, numerical failures exit 4.
"""


class NotmfError(Exception):
    exit_code = 1


class ParseError(NotmfError, ValueError):
    exit_code = 2


class DimensionError(NotmfError, ValueError):
    exit_code = 3


class ConfigError(NotmfError, ValueError):
    exit_code = 3


class SeriesTooShortError(ConfigError):
    pass


class SizeCapError(ConfigError):
    """Refusal to materialize a dense matrix above the configured cap."""


class NumericalError(NotmfError, ArithmeticError):
    exit_code = 4


class SingularityError(NumericalError):
    pass
