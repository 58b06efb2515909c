"""Householder reflections and their sequential composition.

A reflection ``H(v) = I - 2 v v^T / ||v||^2`` is orthogonal, involutory, has
determinant -1, and is invariant to rescaling of ``v``. Products of L such
reflections cover exactly the orthogonal matrices with determinant
``(-1)^L``; the constructive converse (:func:`decompose`) recovers N
reflection vectors from any orthogonal matrix in the reachable component.

The sequential apply here is the brute-force oracle for the factored
compact-WY path in :mod:`cwykit.cwy`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DecompositionDrift,
    NotOrthogonal,
    ShapeMismatch,
    WrongDeterminant,
    ZeroVector,
)

#: Reflection vectors with 2-norm below this are rejected: the direction is
#: numerically meaningless. The prescribed SGD never shrinks norms, so
#: hitting this floor indicates caller error rather than algorithm failure.
NORM_FLOOR = 1e-12

#: |q1| at or above this is treated as the exact +-1 case of the
#: constructive decomposition.
_CASE_BOUNDARY = 1.0 - 1e-12


@dataclass(frozen=True)
class HouseholderStack:
    """Ordered reflection vectors, stored as the rows of an (L, N) array.

    Row ``k`` holds the vector of the (k+1)-th reflection in the product
    ``H(v^(1)) ... H(v^(L))``. Vectors are kept unnormalized; consumers
    normalize as needed. Immutable once built.
    """

    vectors: np.ndarray

    def __post_init__(self):
        v = np.array(self.vectors, dtype=float, copy=True)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ShapeMismatch(f"stack needs a nonempty (L, N) array, got {v.shape}")
        if v.shape[0] > v.shape[1]:
            raise ShapeMismatch(
                f"at most N reflections in dimension N, got shape {v.shape}"
            )
        norms = np.linalg.norm(v, axis=1)
        if np.min(norms) < NORM_FLOOR:
            raise ZeroVector(
                f"reflection vector norm {np.min(norms):.3e} below {NORM_FLOOR}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    @property
    def l(self) -> int:
        return self.vectors.shape[0]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.vectors, axis=1)


def reflect(v: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply ``H(v)`` to a vector or to each column of a matrix.

    Computed as ``x - (2 v^T x / ||v||^2) v`` without forming H. An exact
    involution in exact arithmetic, and invariant to rescaling of ``v``.

    Raises:
        ZeroVector: if ``||v|| < 1e-12``.
    """
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    nsq = float(v @ v)
    if nsq < NORM_FLOOR * NORM_FLOOR:
        raise ZeroVector(f"reflection vector norm {np.sqrt(nsq):.3e} below {NORM_FLOOR}")
    if v.shape[0] != x.shape[0]:
        raise ShapeMismatch(f"vector of dim {v.shape[0]} vs operand rows {x.shape[0]}")
    coeff = (2.0 / nsq) * (v @ x)
    if x.ndim == 1:
        return x - coeff * v
    return x - np.outer(v, coeff)


def apply_stack(stack: HouseholderStack, x: np.ndarray) -> np.ndarray:
    """Apply the full product ``H(v^(1)) ... H(v^(L))`` to ``x``.

    Reflections are applied right-to-left onto ``x``, one at a time. This is
    the sequential reference path; the factored equivalent lives in
    :mod:`cwykit.cwy`.
    """
    out = np.array(x, dtype=float, copy=True)
    for k in range(stack.l - 1, -1, -1):
        out = reflect(stack.vectors[k], out)
    return out


def _case_vector(col: np.ndarray) -> np.ndarray:
    """Reflection vector sending the unit column ``col`` to e1.

    Three cases on the leading entry: the generic ``(q - e1) / ||q - e1||``,
    and the degenerate boundaries q1 = +1 (last basis vector; H then fixes
    e1) and q1 = -1 (first basis vector).
    """
    m = col.shape[0]
    q1 = col[0]
    if q1 >= _CASE_BOUNDARY:
        v = np.zeros(m)
        v[-1] = 1.0
        return v
    if q1 <= -_CASE_BOUNDARY:
        v = np.zeros(m)
        v[0] = 1.0
        return v
    v = col.copy()
    v[0] -= 1.0
    return v / np.linalg.norm(v)


def _reduce_column(work: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """One elimination step: reflect ``work`` so its first column becomes e1.

    Returns the reflection vector and the reflected matrix. Verifies the
    reduction numerically; the constructive proofs only need this block
    shape, so failure means the input is too ill-conditioned to decompose.
    """
    v = _case_vector(work[:, 0])
    reduced = reflect(v, work)
    err = np.sqrt((reduced[0, 0] - 1.0) ** 2 + float(reduced[1:, 0] @ reduced[1:, 0]))
    if err > tol:
        raise DecompositionDrift(
            f"leading column not reduced to e1 (residual {err:.3e} > {tol:.1e})"
        )
    return v, reduced


def decompose(q: np.ndarray) -> HouseholderStack:
    """Factor an orthogonal matrix into exactly N Householder reflections.

    Only the component with ``det(Q) = (-1)^N`` is reachable by N
    reflections; inputs from the other component are rejected rather than
    silently sign-flipped. Each column is eliminated in turn with the
    three-case reflection rule, the eliminated vector is stored padded with
    leading zeros, and the recursion continues on the trailing submatrix.

    The returned stack satisfies ``apply_stack(stack, I) == q`` up to
    roundoff growing like 1e-9 * N.

    Raises:
        NotOrthogonal: if ``||Q^T Q - I||_F > 1e-10 * N``.
        WrongDeterminant: if ``det(Q)`` is not ``(-1)^N`` within 1e-6.
        DecompositionDrift: if a reflection fails to reduce its column.
    """
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got {q.shape}")
    n = q.shape[0]
    residual = np.linalg.norm(q.T @ q - np.eye(n))
    if residual > 1e-10 * max(1.0, float(n)):
        raise NotOrthogonal(f"||Q^T Q - I||_F = {residual:.3e} for N = {n}")
    expected_det = -1.0 if n % 2 else 1.0
    det = float(np.linalg.det(q))
    if abs(det - expected_det) > 1e-6:
        raise WrongDeterminant(
            f"det(Q) = {det:+.6f}, need {expected_det:+.0f} for N = {n}: this "
            "determinant component is not a product of N reflections"
        )
    if n == 1:
        # Base case of the constructive proof: the single reflection [q11].
        return HouseholderStack(q.copy())
    vectors = np.zeros((n, n))
    work = q.copy()
    for k in range(n):
        v, reduced = _reduce_column(work, tol=1e-10)
        vectors[k, k:] = v
        work = reduced[1:, 1:]
    return HouseholderStack(vectors)
