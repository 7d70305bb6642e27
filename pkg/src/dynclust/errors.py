"""Shared exception vocabulary for the dynclust engines."""


class DynClustError(Exception):
    """Base class for all dynclust errors."""


class DuplicateInsert(DynClustError):
    """A point id was inserted while already active."""


class DeleteOfInactive(DynClustError):
    """A delete referred to an id that is not currently active."""


class UnknownPoint(DynClustError):
    """A query referred to an id that was never inserted."""


class UnsupportedKind(DynClustError):
    """Requested metric or hash-family kind is not available."""


class RadiusOutOfRange(DynClustError):
    """Scale parameter outside the valid range for the family."""


class CapacityExceeded(DynClustError):
    """A tree node was asked to hold more points than its capacity."""


class Infeasible(DynClustError):
    """Engine configuration cannot produce a solution (bad scale ladder)."""


class BudgetExceeded(DynClustError):
    """Algorithm under test exceeded its distance-query budget."""


class NotCleanOperation(DynClustError):
    """Consistent-metric materialization requested at a non-clean operation."""


class MalformedStream(DynClustError):
    """Stream file could not be parsed."""
