"""Exception hierarchy shared by all igeo modules."""


class IgeoError(ValueError):
    """Base class for every error raised by igeo."""


class InvalidAlphabetError(IgeoError):
    pass


class PmfError(IgeoError):
    """Input is not a strictly positive probability vector."""


class DomainError(IgeoError):
    """Parameter lies outside the model's domain."""


class InvalidOrderError(IgeoError):
    """Order / alpha parameter outside its admissible range."""


class UseKLError(InvalidOrderError):
    """Order 1 requested from a formula that is 0/0 there; call kl instead."""


class SizeMismatchError(IgeoError):
    pass


class EscortMapContractError(IgeoError):
    """A custom escort map returned something that is not a pmf."""


class GeneratorError(IgeoError):
    """Convex generator failed f(1) = 0, f''(1) != 0 or the convexity probe."""


class StencilError(IgeoError):
    """Finite-difference stencil left the parameter domain even after shrinking."""


class SingularMetricError(IgeoError):
    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class BiasError(IgeoError):
    """Estimator is not (locally) unbiased under the declared weighting."""


class NotExponentialEscortError(IgeoError):
    """log F(p_theta) is not affine in theta with the supplied c, h, psi."""


class BoundViolationError(IgeoError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConfigError(IgeoError):
    """Experiment configuration failed schema validation."""
