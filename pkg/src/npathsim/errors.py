"""Exception and warning types shared across the package."""


class NPathError(Exception):
    """Base class for all simulator errors."""


class InvalidDutyError(NPathError, ValueError):
    pass


class InvalidGuardError(NPathError, ValueError):
    pass


class SynthesisError(NPathError):
    """No PWM pattern on the grid met the spectral targets."""

    def __init__(self, message, best_suppression_db=None):
        super().__init__(message)
        self.best_suppression_db = best_suppression_db


class NetlistError(NPathError, ValueError):
    """Malformed netlist or netlist text (carries line/column when parsed)."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"line {line}, column {column or 1}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column


class SingularTopologyError(NPathError):
    """A subcircuit has no DC reference in some switch configuration."""

    def __init__(self, message, nodes=()):
        super().__init__(message)
        self.nodes = tuple(nodes)


class PeriodMismatchError(NPathError, ValueError):
    pass


class ResonanceSingularityError(NPathError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class InsufficientSettlingError(NPathError):
    def __init__(self, message, delta=None):
        super().__init__(message)
        self.delta = delta


class NoPeakError(NPathError):
    pass


class ConfigError(NPathError, ValueError):
    def __init__(self, message, line=None, column=None, key=None):
        if line is not None:
            message = f"line {line}, column {column or 1}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column
        self.key = key


class StiffnessWarning(RuntimeWarning):
    """Propagation interval is long relative to the fastest mode."""
