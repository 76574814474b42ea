"""Exception hierarchy shared by all modules."""


class IntGWError(Exception):
    """Base class for domain errors raised by :mod:`intgw`."""


class ConfigurationError(IntGWError, ValueError):
    """Invalid model specification, weight vector or run configuration."""


class DegeneratePathError(IntGWError, ValueError):
    """The path carries no information for the requested quantity."""


class DegenerateDesignError(DegeneratePathError):
    """The weighted normal equations are singular or numerically so."""


class DomainError(IntGWError, ValueError):
    """The requested quantity does not exist for this parameter value."""


class TauUndefinedError(IntGWError, ValueError):
    """The transience index cannot be formed because sigma2_hat is zero."""


class ModelWarning(UserWarning):
    """The configuration lies outside the model's assumptions but is usable."""


class MalformedInputError(IntGWError, ValueError):
    """An input file or record could not be parsed."""


class CalibrationError(DomainError):
    """Limit-law critical values cannot be formed from the plug-in estimates."""
