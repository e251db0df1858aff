"""Exception hierarchy shared by all modules."""


class TqmError(Exception):
    """Base class for toolkit errors."""


class InputError(TqmError, ValueError):
    """Argument outside an operation's domain."""


class SingularInputError(InputError):
    """Input where a normalization or denominator vanishes (e.g. w = 0)."""


class PoleError(InputError):
    """Evaluation requested exactly on a propagator pole."""


class ZeroDispersionError(InputError):
    """A Gaussian width collapsed to zero."""


class NarrowBeamError(InputError):
    """Packet too wide for the narrow-beam approximation."""


class NumericalError(TqmError, ArithmeticError):
    """A numerical procedure failed to converge or lost probability."""


class ConvergenceError(NumericalError):
    """Quadrature or iteration did not reach the requested tolerance."""


class FluxError(NumericalError):
    """Packet did not deliver enough flux through a detector plane."""


class ModelInconsistencyError(NumericalError):
    """Derived quantities contradict each other beyond tolerance."""
