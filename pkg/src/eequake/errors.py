"""Exception hierarchy shared by all eequake modules."""


class EEQuakeError(Exception):
    """Base class for every error raised by this package."""


class DataError(EEQuakeError, ValueError):
    """Malformed or insufficient input data."""


class MissingColumnError(DataError):
    def __init__(self, column: str):
        super().__init__(f"missing required column: {column!r}")
        self.column = column


class BarInvariantError(DataError):
    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class RankDeficientError(EEQuakeError, ValueError):
    """Regression design matrix lacks full column rank."""


class TooFewExtremaError(EEQuakeError):
    """Not enough extrema to build spline envelopes.

    Raised during sifting; callers treat it as a termination signal (the
    input is residue-like), not as a failure.
    """


class EmptySpectrumError(EEQuakeError, ValueError):
    pass


class DegenerateEnergyError(EEQuakeError, ValueError):
    """Energy series has zero spread or zero maximum."""


class PipelineError(EEQuakeError):
    """Error raised by a pipeline stage, tagged with the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
