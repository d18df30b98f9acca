"""Exception hierarchy. Each class carries the CLI exit code for its category."""


class AmmfgError(Exception):
    exit_code = 1
    category = "error"


class ConfigError(AmmfgError, ValueError):
    exit_code = 2
    category = "config"


class AdmissibilityError(AmmfgError, ValueError):
    """Control interval or cost model violates a model bound."""

    exit_code = 3
    category = "admissibility"


class NumericalError(AmmfgError, ArithmeticError):
    exit_code = 4
    category = "numerical"


class FloorViolation(NumericalError):
    """Pool reserve fell below the floor eps0."""


class CFLViolation(NumericalError):
    pass


class NonFiniteError(NumericalError):
    pass


class ConvergenceError(AmmfgError, RuntimeError):
    exit_code = 5
    category = "convergence"


class OutputError(AmmfgError, OSError):
    exit_code = 6
    category = "io"
