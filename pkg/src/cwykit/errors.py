"""Exception types shared across the package.

Everything derives from :class:`NumericalContractError`, itself a
``ValueError``, so callers can catch the whole family or individual
conditions.
"""


class NumericalContractError(ValueError):
    """A documented numerical precondition or postcondition was violated."""


class ShapeMismatch(NumericalContractError):
    """Operands have incompatible dimensions."""


class SingularDiagonal(NumericalContractError):
    """A triangular matrix has a (near-)zero diagonal entry."""


class RankDeficient(NumericalContractError):
    """QR factorization detected a numerically rank-deficient input."""


class NoConvergence(NumericalContractError):
    """An iteration hit its budget before reaching tolerance.

    Carries the best estimate found so far in ``estimate``.
    """

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


class ZeroVector(NumericalContractError):
    """A reflection vector has norm below the representable floor (1e-12)."""


class NotOrthogonal(NumericalContractError):
    """Input matrix is not orthogonal to the required tolerance."""


class WrongDeterminant(NumericalContractError):
    """Orthogonal input lies in the determinant component that the
    reflection decomposition cannot reach."""


class DecompositionDrift(NumericalContractError):
    """A reflection failed to reduce the leading column to e1; the input is
    too ill-conditioned for the constructive decomposition."""


class NotOnManifold(NumericalContractError):
    """Matrix columns are not orthonormal to the required tolerance."""


class RequiresStrictTruncation(NumericalContractError):
    """The truncated parametrization needs strictly fewer columns than rows."""


class SolveFailure(NumericalContractError):
    """A dense linear solve failed; for the retraction systems this is
    theoretically impossible and indicates a bug in the caller's factors."""


class UnknownMethod(NumericalContractError):
    """Unrecognized method name passed to the FLOP model."""
