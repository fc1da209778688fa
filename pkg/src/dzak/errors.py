"""Exception hierarchy with stable CLI exit codes."""


class DzakError(Exception):
    """Base class; exit_code is used by the CLI dispatcher."""

    exit_code = 1


class ConfigError(DzakError):
    exit_code = 10


class UnknownKeyError(ConfigError):
    exit_code = 11


class TypeMismatchError(ConfigError):
    exit_code = 12


class ConstraintError(ConfigError):
    exit_code = 13


class GridError(DzakError):
    exit_code = 20


class FieldError(DzakError):
    exit_code = 21


class NormError(DzakError):
    exit_code = 22


class SolverError(DzakError):
    exit_code = 30


class VerificationError(DzakError):
    exit_code = 40


class CounterexampleError(DzakError):
    exit_code = 50
