"""Exception types shared across the package."""


class HolosimError(Exception):
    """Base class for all errors raised by this package."""


class BasisMismatchError(HolosimError):
    """Operands live on different level bases or have inconsistent dimensions."""


class UnknownLevelError(HolosimError):
    """A level label is not part of the basis."""


class UnsupportedModelError(HolosimError):
    """The requested operation is not defined for this model."""


class AdiabaticityError(HolosimError):
    """Loop parameters are too fast for adiabatic following (omega <= 10 gamma)."""


class LeakageError(HolosimError):
    """Population left the computational-plus-sink subspace beyond the allowed bound."""

    def __init__(self, message: str, leakage: float = float("nan")):
        self.leakage = leakage
        super().__init__(message)


class NumericalError(HolosimError):
    """Integration produced a state that violates a hard numerical invariant."""


class NormGrowthError(NumericalError):
    """Squared norm increased along a no-jump propagation."""


class DegeneracyCrossingError(HolosimError):
    """Dark-subspace dimension changed along a holonomy path."""


class ConfigError(HolosimError):
    """Invalid experiment configuration; carries the offending field name."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field '{field}': {message}")
