"""Exception types raised by the estimation pipeline."""


class RotationEstimationError(Exception):
    """Base class for all errors raised by stereorot."""


class PoleProximityError(RotationEstimationError, ValueError):
    """Point too close to the projection pole (0, 0, 1)."""


class EmptyInputError(RotationEstimationError, ValueError):
    pass


class AllDegenerateError(RotationEstimationError):
    """Every correspondence has x == y (within tolerance)."""


class NoPeakError(RotationEstimationError):
    pass


class DegenerateProjectionError(RotationEstimationError, ValueError):
    """A point is parallel to the rotation axis, so its angle is undefined."""


class NoVotesError(RotationEstimationError):
    pass


class RankDeficientError(RotationEstimationError):
    """Constraint directions do not pin down a single axis."""


class NoConsensusError(RotationEstimationError):
    pass


class InvalidConfigError(RotationEstimationError, ValueError):
    pass


class ParseError(RotationEstimationError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyFileError(RotationEstimationError, ValueError):
    pass
