"""Exception hierarchy shared by all modules."""


class SeqlatError(Exception):
    """Base class for every error raised by the package."""


class InvalidInputError(SeqlatError, ValueError):
    """Malformed arguments: wrong shapes, out-of-range parameters."""


class DegenerateLandmarksError(SeqlatError, ValueError):
    """A landmark set does not span R^p (zero or near-zero width)."""


class NotLaterableError(SeqlatError):
    """No laterative ordering could be found for the graph."""


class DegenerateStepError(SeqlatError):
    """The lateration walk stalled on degenerate landmark sets.

    Attributes
    ----------
    step : int
        Number of nodes already placed when the walk stalled.
    """

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


class NumericalFailureError(SeqlatError, FloatingPointError):
    """An optimizer produced a non-finite objective value."""


class ScenarioInfeasibleError(SeqlatError):
    """Repeated sampling never produced a laterable instance."""
