"""Exception hierarchy shared by all ergovol modules."""


class ErgovolError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(ErgovolError):
    """A model or market parameter is outside its admissible range."""


class SingularCoefficientError(ErgovolError):
    """The diffusion coefficient vanishes (or is non-finite) where it is needed."""


class WindowTooWideError(ErgovolError):
    """The scale derivative overflows on the requested window.

    Carries ``suggested_window`` with a shrunk window that stays finite.
    """

    def __init__(self, msg, suggested_window=None):
        super().__init__(msg)
        self.suggested_window = suggested_window


class NotErgodicError(ErgovolError):
    """The speed-measure normalizer diverges; the model has no ergodic law."""


class DegenerateError(ErgovolError):
    """A variance-like quantity is zero or a moment matrix is singular."""


class EvaluationError(ErgovolError):
    """A user-supplied function returned a non-finite value."""


class ExtrapolationError(ErgovolError):
    """A query point lies outside the tabulated window."""


class ConfigError(ErgovolError):
    """Bad CLI configuration: unknown key, missing flag, unparseable value."""


class PrecisionError(ErgovolError):
    """Quadrature failed to converge to the requested tolerance.

    ``achieved`` holds the best available estimate.
    """

    def __init__(self, msg, achieved=None):
        super().__init__(msg)
        self.achieved = achieved


class SimulationError(ErgovolError):
    """Too many Monte Carlo paths had to be discarded."""


class InsufficientCyclesError(ErgovolError):
    """Fewer regeneration cycles completed than required; extend the horizon."""


class UnidentifiableError(ErgovolError):
    """A least-squares design is rank deficient."""
