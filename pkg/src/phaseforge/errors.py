"""Exception types shared across the package."""


class PhaseforgeError(Exception):
    """Base class for all package-specific failures."""


class DegenerateLikelihood(PhaseforgeError):
    """Every grid point carries likelihood below the underflow floor.

    Signals a grid that is too coarse for the posterior, or a pathological
    design; ``step_index`` is set when raised from inside an adaptive run.
    """

    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index


class EmptySample(PhaseforgeError):
    """A dispersion statistic was requested for an empty sample."""


class NullingSingularity(PhaseforgeError):
    """Fisher information evaluated at (or too close to) exact nulling."""


class NonPositiveAlpha(PhaseforgeError):
    """A baseline formula needs strictly positive field amplitude."""


class SingularFit(PhaseforgeError):
    """Normal matrix of a least-squares problem is rank deficient."""


class NoConvergence(PhaseforgeError):
    """Iterative fit exhausted its iteration budget without converging."""


class ExcessiveExclusions(PhaseforgeError):
    """More than the tolerated fraction of Monte Carlo trials failed."""


class SchemaError(PhaseforgeError):
    """A persisted file does not match the expected schema or version."""
