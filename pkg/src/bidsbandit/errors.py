"""Exception and warning types shared across the package."""


class BidsError(Exception):
    """Base class for all library errors."""


class InvalidParameter(BidsError, ValueError):
    pass


class OutOfRange(BidsError, ValueError):
    pass


class LeafBin(BidsError):
    pass


class NotAtBoundary(BidsError):
    pass


class NotInitialized(BidsError):
    pass


class DegenerateDirection(BidsError):
    pass


class InsufficientData(BidsError, ValueError):
    pass


class DegenerateInterval(BidsError, ValueError):
    pass


class AcceptanceTooLow(BidsError):
    pass


class NonPositiveRegret(BidsError, ValueError):
    pass


class ParseError(BidsError, ValueError):
    pass


class EmptyDataset(BidsError, ValueError):
    pass


class ConfigError(BidsError, ValueError):
    pass


class DegenerateScheduleWarning(UserWarning):
    """A batch received zero rounds, or the grid overflowed the horizon."""
