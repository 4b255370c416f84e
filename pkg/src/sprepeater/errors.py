"""Exception types shared across the package."""


class RepeaterError(Exception):
    """Base class for all package errors."""


class TruncationError(RepeaterError, ValueError):
    """A state would need more photons in a mode than the register allows."""


class InvalidParameterError(RepeaterError, ValueError):
    """A parameter is outside its allowed range or inconsistent."""


class DivergenceError(RepeaterError, ZeroDivisionError):
    """A rate formula diverges (zero success probability)."""


class InfeasibleError(RepeaterError):
    """A requested target cannot be reached for any parameter value."""
