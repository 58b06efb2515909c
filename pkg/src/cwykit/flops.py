"""Closed-form FLOP accounting and an instruction-counting verification mode.

The closed forms give the leading-term operation counts of one forward pass
of each parametrization or retraction update, under the usual conventions:
a (d1 x d2) by (d2 x d3) product costs 2*d1*d2*d3 scalar operations, dense
and triangular d x d inversion cost d^3 and d^3/3, and a thin QR of a
d1 x d2 matrix costs 2*d2^2*(d1 - d2/3). Evaluation is exact rational
arithmetic; rounding happens only at presentation.

The counting mode re-runs the actual kernels with every scalar multiply,
add, and divide incremented on a per-invocation counter, as an empirical
check that implementations track the model's leading term. Counts use pure
Python loops and are meant for moderate dimensions.

The square-group product-of-reflections rows carry unit-constant leading
terms (they come from an asymptotic table, not an exact-constant one), so
empirical ratios against them are meaningful only where the preprocessing
terms dominate; the tests pin such points.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ShapeMismatch, UnknownMethod

METHODS = (
    "rgd-c-qr",
    "rgd-e-qr",
    "rgd-c-c",
    "rgd-e-c",
    "own",
    "t-cwy",
    "cwy-apply",
    "hr-apply",
)

#: Methods whose estimate takes (n, m): one gradient-step / parametrization
#: forward on an N x M point.
STIEFEL_METHODS = ("rgd-c-qr", "rgd-e-qr", "rgd-c-c", "rgd-e-c", "own", "t-cwy")

COUNT_KERNELS = ("gemm", "triangular-solve", "t-cwy", "cwy-apply")


@dataclass(frozen=True)
class FlopEstimate:
    """Exact rational operation count of one method at given dimensions."""

    method: str
    dims: dict
    exact: Fraction

    @property
    def flops(self) -> int:
        """The exact value rounded down to an integer."""
        return int(self.exact)


def _stiefel_form(method: str, n: Fraction, m: Fraction) -> Fraction:
    if method == "rgd-c-qr":
        return 10 * n * m ** 2 - 2 * m ** 3 / 3
    if method == "rgd-e-qr":
        return 14 * n * m ** 2 - 2 * m ** 3 / 3
    if method == "rgd-c-c":
        return 28 * n * m ** 2 + 16 * m ** 3
    if method == "rgd-e-c":
        return 72 * n * m ** 2 + 25 * m ** 3
    if method == "own":
        return 4 * n * m ** 2 + 14 * m ** 3 / 3
    if method == "t-cwy":
        return 4 * n * m ** 2 + 7 * m ** 3 / 3
    raise UnknownMethod(method)


def estimate(method: str, *, n: int, m: int | None = None, l: int | None = None,
             t: int | None = None) -> FlopEstimate:
    """Evaluate a method's closed form exactly.

    Column-orthonormal methods take ``n, m`` (n >= m >= 0); the square-group
    apply rows take ``n, l, t`` (reflection count and rollout length).

    Raises:
        UnknownMethod: for names outside :data:`METHODS`.
        ShapeMismatch: for invalid dimension combinations.
    """
    key = method.strip().lower()
    if key not in METHODS:
        raise UnknownMethod(f"{method!r}; known methods: {', '.join(METHODS)}")
    if n < 1:
        raise ShapeMismatch(f"n must be positive, got {n}")
    if key in STIEFEL_METHODS:
        if m is None or m < 0 or m > n:
            raise ShapeMismatch(f"need 0 <= m <= n, got n={n}, m={m}")
        exact = _stiefel_form(key, Fraction(n), Fraction(m))
        return FlopEstimate(method=key, dims={"n": n, "m": m}, exact=exact)
    if l is None or t is None or l < 1 or l > n or t < 0:
        raise ShapeMismatch(f"need 1 <= l <= n and t >= 0, got n={n}, l={l}, t={t}")
    nf, lf, tf = Fraction(n), Fraction(l), Fraction(t)
    if key == "cwy-apply":
        exact = tf * lf * nf + lf ** 2 * nf + lf ** 3
    else:  # hr-apply
        exact = tf * lf * nf
    return FlopEstimate(method=key, dims={"n": n, "l": l, "t": t}, exact=exact)


class FlopCounter:
    """Per-invocation scalar operation counter (never a module global)."""

    def __init__(self):
        self.mul = 0
        self.add = 0
        self.div = 0

    @property
    def total(self) -> int:
        return self.mul + self.add + self.div


def gemm_counted(a: np.ndarray, b: np.ndarray, counter: FlopCounter) -> np.ndarray:
    """Plain triple-loop matrix product; exactly 2*d1*d2*d3 counted ops."""
    d1, d2 = a.shape
    d2b, d3 = b.shape
    if d2 != d2b:
        raise ShapeMismatch(f"inner dims {d2} != {d2b}")
    out = np.zeros((d1, d3))
    for i in range(d1):
        for j in range(d3):
            acc = 0.0
            for k in range(d2):
                acc += a[i, k] * b[k, j]
            counter.mul += d2
            counter.add += d2
            out[i, j] = acc
    return out


def triangular_solve_counted(s: np.ndarray, rhs: np.ndarray,
                             counter: FlopCounter) -> np.ndarray:
    """Back-substitution with counting; m*m ops per right-hand side."""
    m = s.shape[0]
    rhs = rhs.reshape(m, -1)
    out = np.zeros_like(rhs, dtype=float)
    for col in range(rhs.shape[1]):
        for i in range(m - 1, -1, -1):
            acc = rhs[i, col]
            for j in range(i + 1, m):
                acc -= s[i, j] * out[j, col]
            counter.mul += m - 1 - i
            counter.add += m - 1 - i
            out[i, col] = acc / s[i, i]
            counter.div += 1
    return out


def triangular_inverse_counted(s: np.ndarray, counter: FlopCounter) -> np.ndarray:
    """Upper-triangular inverse; roughly m^3/3 counted ops."""
    m = s.shape[0]
    out = np.zeros((m, m))
    for j in range(m):
        out[j, j] = 1.0 / s[j, j]
        counter.div += 1
        for i in range(j - 1, -1, -1):
            acc = 0.0
            for k in range(i + 1, j + 1):
                acc += s[i, k] * out[k, j]
            counter.mul += j - i
            counter.add += j - i
            out[i, j] = -acc / s[i, i]
            counter.div += 1
    return out


def _normalized_columns_counted(vectors: np.ndarray,
                                counter: FlopCounter) -> np.ndarray:
    l, n = vectors.shape
    u = np.zeros((n, l))
    for i in range(l):
        acc = 0.0
        for k in range(n):
            acc += vectors[i, k] * vectors[i, k]
        counter.mul += n
        counter.add += n
        norm = float(np.sqrt(acc))
        for k in range(n):
            u[k, i] = vectors[i, k] / norm
        counter.div += n
    return u


def _striu_half_eye_counted(gram: np.ndarray) -> np.ndarray:
    s = np.triu(gram, k=1)
    np.fill_diagonal(s, 0.5)
    return s


def tcwy_gamma_counted(vectors: np.ndarray,
                       counter: FlopCounter) -> np.ndarray:
    """Truncated parametrization forward with counting; mirrors the
    production path: normalize, Gram product, M x M triangular solve,
    skinny product, identity-block assembly."""
    l, n = vectors.shape
    if l >= n:
        raise ShapeMismatch(f"need M < N, got M = {l}, N = {n}")
    u = _normalized_columns_counted(vectors, counter)
    gram = gemm_counted(u.T, u, counter)
    s = _striu_half_eye_counted(gram)
    x = triangular_solve_counted(s, u[:l, :].T.copy(), counter)
    omega = -gemm_counted(u, x, counter)
    for i in range(l):
        omega[i, i] += 1.0
    counter.add += l * n  # the subtraction from the identity block
    return omega


def cwy_apply_counted(vectors: np.ndarray, x: np.ndarray,
                      counter: FlopCounter) -> np.ndarray:
    """Factored apply with counting: preprocessing (normalize, Gram,
    explicit triangular inverse) plus the per-step three-product path for
    each column of ``x``."""
    l, n = vectors.shape
    u = _normalized_columns_counted(vectors, counter)
    gram = gemm_counted(u.T, u, counter)
    s = _striu_half_eye_counted(gram)
    s_inv = triangular_inverse_counted(s, counter)
    x = x.reshape(n, -1)
    out = np.zeros_like(x, dtype=float)
    for col in range(x.shape[1]):
        h = x[:, col:col + 1]
        ut_h = gemm_counted(u.T, h, counter)
        v = gemm_counted(s_inv, ut_h, counter)
        uv = gemm_counted(u, v, counter)
        out[:, col] = h[:, 0] - uv[:, 0]
        counter.add += n
    return out


def count_empirical(kernel: str, *, n: int | None = None, m: int | None = None,
                    l: int | None = None, t: int | None = None,
                    d1: int | None = None, d2: int | None = None,
                    d3: int | None = None, seed: int = 0) -> int:
    """Run an instrumented kernel on random data and return its scalar
    operation count.

    Kernels: ``gemm`` (d1, d2, d3), ``triangular-solve`` (m, optionally t
    right-hand sides), ``t-cwy`` (n, m), ``cwy-apply`` (n, l, t).
    """
    rng = np.random.default_rng(seed)
    counter = FlopCounter()
    if kernel == "gemm":
        if None in (d1, d2, d3):
            raise ShapeMismatch("gemm needs d1, d2, d3")
        gemm_counted(rng.standard_normal((d1, d2)),
                     rng.standard_normal((d2, d3)), counter)
    elif kernel == "triangular-solve":
        if m is None:
            raise ShapeMismatch("triangular-solve needs m")
        cols = 1 if t is None else t
        s = np.triu(rng.standard_normal((m, m)))
        np.fill_diagonal(s, 1.0 + np.abs(np.diag(s)))
        triangular_solve_counted(s, rng.standard_normal((m, cols)), counter)
    elif kernel == "t-cwy":
        if n is None or m is None:
            raise ShapeMismatch("t-cwy needs n, m")
        tcwy_gamma_counted(rng.standard_normal((m, n)), counter)
    elif kernel == "cwy-apply":
        if n is None or l is None or t is None:
            raise ShapeMismatch("cwy-apply needs n, l, t")
        cwy_apply_counted(rng.standard_normal((l, n)),
                          rng.standard_normal((n, t)), counter)
    else:
        raise UnknownMethod(f"{kernel!r}; known kernels: {', '.join(COUNT_KERNELS)}")
    return counter.total


def stiefel_grid(sizes, m_fracs) -> list[FlopEstimate]:
    """Estimates for every column-orthonormal method over an (N, M) grid."""
    out = []
    for n in sizes:
        for frac in m_fracs:
            m = max(1, min(n, round(n * frac)))
            for method in STIEFEL_METHODS:
                out.append(estimate(method, n=n, m=m))
    return out
