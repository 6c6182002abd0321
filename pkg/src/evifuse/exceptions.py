"""Exception taxonomy shared across the package."""


class EvifuseError(Exception):
    """Base class for all package-specific errors."""


class FrameMismatchError(EvifuseError):
    """Two bodies of evidence refer to different frames of discernment."""


class TotalConflictError(EvifuseError):
    """Dempster combination is undefined because the inputs fully conflict."""

    def __init__(self, conflict: float):
        self.conflict = conflict
        super().__init__(f"total conflict between evidence bodies (K={conflict!r})")


class TooFewBoesError(EvifuseError):
    """An operation needs at least two bodies of evidence."""


class RowSumExceedsOneError(EvifuseError):
    """A score row sums to more than one beyond the accepted tolerance."""

    def __init__(self, row: int, total: float):
        self.row = row
        self.total = total
        super().__init__(f"score row {row} sums to {total!r} > 1")


class InvalidWeightsError(EvifuseError):
    """Fusion weights cannot be normalized or produce negative mass."""


class DegenerateChiefError(EvifuseError):
    """No body of evidence puts mass on the chief focal element."""


class LengthMismatchError(EvifuseError):
    """Paired vectors have different lengths."""


class EmptyInputError(EvifuseError):
    """An information measure received an empty vector."""


class EmptyPoolError(EvifuseError):
    """Ranking or selection received an empty classifier pool."""


class TooFewSamplesError(EvifuseError):
    """A regression path needs at least two samples."""


class NonFiniteLossError(EvifuseError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}")


class ClassMismatchError(EvifuseError):
    """Class labels disagree between a model, scores, or a frame."""


class ParseError(EvifuseError):
    """A file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidCountsError(EvifuseError):
    """Requested dataset shape or counts are not realizable."""


class ClassTooSmallError(EvifuseError):
    """A class has too few samples for a stratified split."""


class TooManySectionsError(EvifuseError):
    """More bandwidth sections were requested than frequency bins."""
