"""Exception hierarchy.

Two families matter to callers: :class:`InputError` (bad data, bad config,
bad files) and :class:`NumericalError` (the math broke down). The CLI maps
them to exit codes 1 and 2.
"""


class RouteMixError(Exception):
    """Base class for all package errors."""


class InputError(RouteMixError, ValueError):
    """Invalid input data, configuration or file contents."""


class DomainError(InputError):
    """Argument outside the mathematical domain of an operation."""


class SchemaError(InputError):
    """A mapped column is missing from a tracking file header."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"missing column {column!r}")


class UnderdeterminedFitError(InputError):
    """Fewer points than control points."""


class InsufficientDataError(InputError):
    """Not enough curves or points for the requested model size."""


class InitializationError(InsufficientDataError):
    """An initial cluster cannot support a fit of the requested degree."""

    def __init__(self, cluster, message):
        self.cluster = cluster
        super().__init__(message)


class CutError(InputError):
    """The start event needed to cut a trajectory is absent."""


class DegenerateDurationError(InputError):
    """A trajectory spans a single instant."""


class LabelMapError(InputError):
    """A label map does not cover the model's clusters."""


class ReportError(InputError):
    """Assignments reference curves unknown to the metadata."""


class VersionError(InputError):
    """Incompatible model file version or degree."""


class NumericalError(RouteMixError, ArithmeticError):
    """Base class for numerical failures."""


class SingularSystemError(NumericalError):
    """A least-squares system is rank deficient."""


class DegenerateClusterError(NumericalError):
    """A cluster's weighted normal equations are singular."""

    def __init__(self, cluster, message):
        self.cluster = cluster
        super().__init__(message)


class ClusterCollapseError(NumericalError):
    """Clusters lost their mass and no reinitialization data was supplied."""

    def __init__(self, clusters):
        self.clusters = list(clusters)
        super().__init__(f"clusters collapsed: {self.clusters}")


class NumericalFailure(NumericalError):
    """A log-density evaluated to a non-finite value."""

    def __init__(self, curve, cluster, message):
        self.curve = curve
        self.cluster = cluster
        super().__init__(message)


class ConsistencyError(NumericalError):
    """EM log-likelihood decreased; carries a dump of the fit state."""

    def __init__(self, message, state=None):
        self.state = state or {}
        super().__init__(message)
