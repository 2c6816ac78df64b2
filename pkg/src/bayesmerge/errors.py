"""Exception and warning types shared across the package."""


class BayesMergeError(Exception):
    """Base class for all package errors."""


class InvalidInput(BayesMergeError):
    """An argument violates an operation's precondition."""


class ResourceLimit(BayesMergeError):
    """An exact computation would exceed its configured size budget."""


class ConfigError(BayesMergeError):
    """A configuration value is inconsistent or out of range."""


class Unsupported(BayesMergeError):
    """The requested combination of model/space has no exact path."""


class NumericalWarning(UserWarning):
    """A numerical result may not have stabilized (tails, liminf schedules)."""
