"""Dense linear-algebra foundations.

Triangular solves, sign-normalized QR, the Cayley map, the matrix
exponential, spectral norms, the skew-symmetric parameter type, and the
plain-text matrix format used by the CLI.

All functions are pure and operate on float64 ``numpy`` arrays. Results are
deterministic for a fixed build (BLAS reduction order is fixed for a given
library and thread count).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    NoConvergence,
    RankDeficient,
    ShapeMismatch,
    SingularDiagonal,
)

#: Diagonal entries below this magnitude are treated as exact zeros.
DIAG_FLOOR = 1e-300


def triangular_solve(s: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``S @ X = rhs`` for upper-triangular ``S`` by back-substitution.

    ``rhs`` may be a vector or a matrix of stacked right-hand-side columns.
    No explicit inverse is formed. Entries of ``s`` below the diagonal are
    ignored; callers are expected to pass genuinely upper-triangular data.

    Raises:
        SingularDiagonal: if any diagonal entry is smaller than 1e-300.
        ShapeMismatch: on incompatible dimensions.
    """
    s = np.asarray(s, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ShapeMismatch(f"expected square triangular matrix, got {s.shape}")
    if rhs.shape[0] != s.shape[0]:
        raise ShapeMismatch(
            f"rhs has {rhs.shape[0]} rows, triangular factor is {s.shape[0]}x{s.shape[0]}"
        )
    if np.min(np.abs(np.diag(s)), initial=np.inf) < DIAG_FLOOR:
        raise SingularDiagonal("triangular factor has a zero diagonal entry")
    return solve_triangular(s, rhs, lower=False)


def qf(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization with the R diagonal forced positive.

    Returns ``(q, r)`` with ``x = q @ r``, orthonormal ``q`` columns and
    ``diag(r) > 0``. The sign convention is enforced after the factorization
    by flipping column signs of ``q`` and row signs of ``r``.

    Raises:
        RankDeficient: if any ``|r[i, i]|`` falls below ``1e-10 * ||x||_F``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < x.shape[1]:
        raise ShapeMismatch(f"qf needs rows >= cols, got {x.shape}")
    scale = float(np.linalg.norm(x))
    q, r = np.linalg.qr(x)
    diag = np.diag(r)
    if scale == 0.0 or np.min(np.abs(diag)) < 1e-10 * scale:
        raise RankDeficient("matrix is numerically rank deficient")
    signs = np.where(diag < 0.0, -1.0, 1.0)
    return q * signs, r * signs[:, None]


@dataclass(frozen=True)
class SkewParam:
    """Skew-symmetric matrix stored as its strictly-upper-triangular entries.

    Storing only the ``dim*(dim-1)/2`` free parameters guarantees that the
    materialized matrix satisfies ``A == -A.T`` exactly.
    """

    dim: int
    upper: np.ndarray

    def __post_init__(self):
        expected = self.dim * (self.dim - 1) // 2
        if self.upper.shape != (expected,):
            raise ShapeMismatch(
                f"skew parameter of dim {self.dim} needs {expected} entries, "
                f"got shape {self.upper.shape}"
            )

    @classmethod
    def from_generator(cls, x: np.ndarray) -> "SkewParam":
        """Build the parameter of ``A = X - X.T`` from an arbitrary square X."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise ShapeMismatch(f"generator must be square, got {x.shape}")
        a = x - x.T
        iu = np.triu_indices(x.shape[0], k=1)
        return cls(dim=x.shape[0], upper=a[iu].copy())

    @classmethod
    def random(cls, dim: int, rng: np.random.Generator) -> "SkewParam":
        """Standard random skew parameter: ``X - X.T`` with X iid N(0, 1)."""
        return cls.from_generator(rng.standard_normal((dim, dim)))

    def materialize(self) -> np.ndarray:
        """Return the dense skew-symmetric matrix; exactly equal to -A.T."""
        a = np.zeros((self.dim, self.dim))
        a[np.triu_indices(self.dim, k=1)] = self.upper
        return a - a.T


def cayley(a: SkewParam) -> np.ndarray:
    """Cayley map ``(I + A/2)^{-1} (I - A/2)`` of a skew parameter.

    Always lands in the rotation (determinant +1) component and never
    produces a -1 eigenvalue; ``I + A/2`` is provably nonsingular because
    skew matrices have purely imaginary spectrum.
    """
    m = a.materialize()
    eye = np.eye(a.dim)
    return np.linalg.solve(eye + 0.5 * m, eye - 0.5 * m)


# Degree-13 diagonal Pade coefficients and its validity radius for the 1-norm.
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def matrix_exp(a: SkewParam) -> np.ndarray:
    """Matrix exponential of a skew parameter via scaling-and-squaring.

    Uses the degree-13 diagonal Pade approximant with norm-based scaling;
    no eigendecomposition path. For skew input the result is a rotation
    (orthogonal with determinant +1).
    """
    m = a.materialize()
    norm = float(np.linalg.norm(m, 1))
    squarings = 0
    if norm > _THETA13:
        squarings = int(math.ceil(math.log2(norm / _THETA13)))
        m = m / (2.0 ** squarings)
    b = _PADE13
    eye = np.eye(a.dim)
    m2 = m @ m
    m4 = m2 @ m2
    m6 = m4 @ m2
    u = m @ (m6 @ (b[13] * m6 + b[11] * m4 + b[9] * m2)
             + b[7] * m6 + b[5] * m4 + b[3] * m2 + b[1] * eye)
    v = (m6 @ (b[12] * m6 + b[10] * m4 + b[8] * m2)
         + b[6] * m6 + b[4] * m4 + b[2] * m2 + b[0] * eye)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(squarings):
        r = r @ r
    return r


def spectral_norm(x: np.ndarray, rel_tol: float = 1e-10,
                  max_iters: int = 10000) -> float:
    """Largest singular value of ``x`` by power iteration on ``X.T @ X``.

    The starting vector is drawn from a generator with a fixed seed, so the
    result is deterministic. A full SVD is deliberately not used here; it
    serves as the independent oracle in the test suite instead.

    Raises:
        NoConvergence: if the Rayleigh quotient has not stabilized to
            ``rel_tol`` within ``max_iters`` sweeps; the exception carries
            the best estimate.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.size == 0:
        raise ShapeMismatch(f"spectral_norm needs a nonempty matrix, got {x.shape}")
    rng = np.random.default_rng(0x5CA1E)
    v = rng.standard_normal(x.shape[1])
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iters):
        w = x.T @ (x @ v)
        rayleigh = float(v @ w)
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        if abs(rayleigh - estimate) <= rel_tol * max(abs(rayleigh), DIAG_FLOOR):
            return math.sqrt(max(rayleigh, 0.0))
        estimate = rayleigh
    raise NoConvergence(
        f"power iteration did not reach rel_tol={rel_tol} in {max_iters} sweeps",
        estimate=math.sqrt(max(estimate, 0.0)),
    )


def read_matrix(path) -> np.ndarray:
    """Read the plain-text matrix format: a ``rows cols`` header line, then
    one whitespace-separated row of decimal floats per line.

    Raises:
        ShapeMismatch: on malformed headers, ragged rows, or non-finite
            entries.
    """
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ShapeMismatch(f"{path}: header must be 'rows cols'")
        try:
            rows, cols = int(header[0]), int(header[1])
        except ValueError as exc:
            raise ShapeMismatch(f"{path}: non-integer header") from exc
        if rows <= 0 or cols <= 0:
            raise ShapeMismatch(f"{path}: dimensions must be positive")
        data = np.zeros((rows, cols))
        for i in range(rows):
            line = fh.readline()
            if not line:
                raise ShapeMismatch(f"{path}: expected {rows} rows, got {i}")
            parts = line.split()
            if len(parts) != cols:
                raise ShapeMismatch(
                    f"{path}: row {i} has {len(parts)} entries, expected {cols}"
                )
            data[i] = [float(p) for p in parts]
    if not np.all(np.isfinite(data)):
        raise ShapeMismatch(f"{path}: non-finite entry in matrix")
    return data


def write_matrix(path, x: np.ndarray) -> None:
    """Write a matrix in the plain-text format read by :func:`read_matrix`."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{x.shape[0]} {x.shape[1]}\n")
        for row in x:
            fh.write(" ".join(f"{value:.17g}" for value in row))
            fh.write("\n")
