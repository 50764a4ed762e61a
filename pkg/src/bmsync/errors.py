"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented invariant (symmetry, feasibility, ...)."""


class ShapeError(ValidationError):
    """Array dimensions do not match the declared block structure."""


class ParseError(ValueError):
    """A text artifact (matrix file, candidate point, sidecar) is malformed."""


class SingularBlockError(RuntimeError):
    """A per-block factorization hit a (numerically) rank-deficient block."""

    def __init__(self, block_index: int, message: str = ""):
        self.block_index = block_index
        super().__init__(message or f"block {block_index} is numerically rank deficient")


class ThresholdUndefinedError(ValueError):
    """A closed-form threshold was requested outside its domain of validity."""


class FlowStepError(RuntimeError):
    """The adaptive flow step underflowed without satisfying the energy check."""
