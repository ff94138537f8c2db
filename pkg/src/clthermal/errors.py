"""Exception hierarchy shared by all modules."""


class CLThermalError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameters(CLThermalError, ValueError):
    pass


class InvalidState(CLThermalError, ValueError):
    pass


class WrongPotential(CLThermalError, ValueError):
    """Free-particle routine called with omega > 0, or vice versa."""


class NonRealResidue(CLThermalError, ArithmeticError):
    """A quantity that must be real came out of complex arithmetic with a
    significant imaginary part."""


class QuadratureNonconvergence(CLThermalError, ArithmeticError):
    pass


class NotApplicable(CLThermalError):
    """The affine decoupling cannot be applied to these coefficients."""


class DegenerateShift(CLThermalError):
    """Decoupled coefficients have L' = 0 or P' = 0, so D', E' cannot be shifted away."""


class IntegratorFailure(CLThermalError, RuntimeError):
    pass


class Instability(CLThermalError, RuntimeError):
    """Grid integration blew up or violated the step-size bound."""


class NonPositiveValue(CLThermalError, ValueError):
    pass


class IncompatibleReference(CLThermalError, ValueError):
    pass


class ConfigError(CLThermalError):
    pass


class DegenerateDamping(CLThermalError, ArithmeticError):
    """The closed-form M_i expressions divide by mu = 0 (critical damping)."""
