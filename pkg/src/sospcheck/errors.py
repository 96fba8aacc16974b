"""Exception types shared across the package."""


class SospcheckError(Exception):
    """Base class for all package-specific errors."""


class NonFiniteError(SospcheckError):
    """An input or intermediate quantity contains NaN or Inf."""


class NonSymmetricError(SospcheckError):
    """A matrix required to be symmetric fails the symmetry check."""


class ShapeMismatchError(SospcheckError):
    """Array shapes are inconsistent with the declared dimensions."""


class RankDeficientError(SospcheckError):
    """A matrix required to have full rank is (numerically) rank deficient."""


class GeneralPositionViolationError(SospcheckError):
    """Boundary inputs for one hidden unit are affinely dependent.

    The per-unit tests require the augmented inputs of boundary samples to be
    linearly independent; more than ``d_x`` of them, or a dependent set,
    breaks that requirement.
    """


class NonPSDHessianError(SospcheckError):
    """A per-sample loss Hessian is not positive semidefinite."""


class NotBoundaryError(SospcheckError):
    """A boundary-only operation was invoked on a unit with no boundary samples."""


class DegenerateGeometryError(SospcheckError):
    """An extreme-ray computation did not yield a one-dimensional intersection."""


class RankDeficientConstraintsError(SospcheckError):
    """Stacked QP constraint rows are not linearly independent."""


class PatternBudgetExceededError(SospcheckError):
    """The number of sign patterns to enumerate exceeds the configured cap."""


class SubsetBudgetExceededError(SospcheckError):
    """The inequality count exceeds the cap for exhaustive subset enumeration."""


class NoDecreaseFoundError(SospcheckError):
    """A claimed descent direction produced no empirical decrease.

    Signals a pipeline bug or a tolerance mismatch; never silently ignored.
    """


class ConstructionFailedError(SospcheckError):
    """A fixture construction did not satisfy its target properties; retry with a new seed."""


class InternalInconsistencyError(SospcheckError):
    """Two stages of the pipeline produced contradictory results."""
