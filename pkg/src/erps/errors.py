"""Exception and warning types raised across the package."""


class ErpsError(Exception):
    """Base class for all package errors."""


class InvalidGrid(ErpsError, ValueError):
    pass


class InvalidState(ErpsError, ValueError):
    pass


class TailClipped(ErpsError):
    """Raised when a wave function carries non-negligible weight at the grid boundary."""


class AllNodes(ErpsError):
    pass


class GridMismatch(ErpsError, ValueError):
    pass


class BadWeights(ErpsError, ValueError):
    pass


class InvalidXi(ErpsError, ValueError):
    pass


class NodeEvaluation(ErpsError):
    """A field was requested at a point where the density vanishes."""


class NormDrift(ErpsError):
    pass


class DisconnectedDomain(ErpsError):
    """Nodes split the weak-value domain into separately reconstructible regions.

    The per-region reconstructions are available as ``regions``; their
    relative phases and weights are not determined by the data.
    """

    def __init__(self, message, regions=()):
        super().__init__(message)
        self.regions = list(regions)


class EmptyBin(ErpsError):
    pass


class EmptyCalibration(ErpsError):
    """The calibration run produced no pointer signal (e.g. zero coupling)."""


class DegenerateJacobianWarning(UserWarning):
    pass


class StrongCouplingWarning(UserWarning):
    pass


class NormalizationWarning(UserWarning):
    pass


class NodeCrossing(UserWarning):
    """A trajectory entered a masked region and was truncated there."""
