"""Exception hierarchy shared by all toolkit modules."""


class PoincareLabError(Exception):
    """Base class for toolkit errors."""


class EvaluationDomainError(PoincareLabError, ValueError):
    """A quantity was requested at a point where it is not finite or not defined."""


class ConvergenceError(PoincareLabError, RuntimeError):
    pass


class ModelViolationError(PoincareLabError, ValueError):
    """A modelling assumption (e.g. positive transport density) failed."""


class CapabilityError(PoincareLabError, TypeError):
    """The measure has no exact moment oracle for the requested quantity."""


class EnvelopeError(PoincareLabError, RuntimeError):
    pass


class RefinementError(PoincareLabError, RuntimeError):
    """Grid or quadrature refinement changed a result by more than its tolerance."""


class NotCenteredError(PoincareLabError, ValueError):
    pass


class SizeError(PoincareLabError, ValueError):
    pass


class ConfigError(PoincareLabError, ValueError):
    pass
