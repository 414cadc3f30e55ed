"""Exception types raised across the package."""


class SchrScaleError(Exception):
    """Base class for all package errors."""


class UnsupportedOperation(SchrScaleError):
    pass


class DomainError(SchrScaleError, ValueError):
    """Position outside the configuration space of the model."""


class EmptyState(SchrScaleError, ValueError):
    pass


class NotNormalizable(SchrScaleError, ValueError):
    pass


class BadWindow(SchrScaleError, ValueError):
    pass


class BadStep(SchrScaleError, ValueError):
    pass


class NotInExtensionFamily(SchrScaleError, ValueError):
    """The multiplier has unbounded ``lambda - u(lambda)`` on the spectrum in use."""


class ToleranceError(SchrScaleError):
    """A certified bracket could not be tightened below the requested width."""


class ResolutionError(SchrScaleError, ValueError):
    pass


class NodeProximity(SchrScaleError):
    """Field evaluated where the density is below the node guard."""


class NodeBreach(SchrScaleError):
    pass


class DomainRequired(SchrScaleError):
    """Operation needs a state in D(H), the top of the Hilbert scale."""
