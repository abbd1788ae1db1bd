"""Exception hierarchy shared by all prpl modules.

Every error carries a ``kind`` used by the service and CLI to map failures
onto exit codes / HTTP payloads: ``validation`` for bad configs or bad
arguments (CLI exit 2), ``runtime`` for IO and data failures (CLI exit 1).
"""


class PrplError(Exception):
    kind = "runtime"


class ValidationError(PrplError):
    """Bad configuration, bad arguments, or violated preconditions."""

    kind = "validation"


# -- feature file parsing ------------------------------------------------

class MalformedHeaderError(PrplError):
    """File does not start with a recognized magic/header or is truncated."""


class DimensionMismatchError(PrplError):
    """Payload size or matrix shapes disagree with the declared dimensions."""


class NonFiniteValueError(PrplError):
    """A feature matrix contains NaN or infinity (message names the row)."""


class LabelOutOfRangeError(PrplError):
    """A label is >= num_classes, or num_classes < 2 for a labeled set."""


# -- numeric degeneracies ------------------------------------------------

class DegenerateMeanError(PrplError):
    """A mean vector required to be nonzero is zero."""


class DegenerateDataError(PrplError):
    """Pairwise distances degenerate (zero median), no bandwidth derivable."""


class NoSharedClassesError(PrplError):
    """No class occurs in both the source set and the confident set."""


class NonFiniteGradientError(PrplError):
    """A gradient update produced NaN or infinity."""


class IncompleteReportError(PrplError):
    """A run report lacks the distances needed for a divergence estimate."""
