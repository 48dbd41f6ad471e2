"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Dimension or factor-label mismatch."""


class NotHermitianError(ValueError):
    """Operator deviates from Hermiticity beyond tolerance."""


class ScenarioMismatchError(ValueError):
    """Objects built for different scenarios were combined."""


class NotSingleTriggerError(ValueError):
    """Correlation coefficients depend on an outcome outside the trigger setting.

    ``offending`` holds (party, setting, outcome) triples that witness it.
    """

    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = tuple(offending)


class InvalidInstrumentError(ValueError):
    """Instrument Choi operators are not positive or do not sum to a channel."""


class SolverError(RuntimeError):
    """The conic solver did not return an optimal, verified solution."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
