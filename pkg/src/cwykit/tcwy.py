"""Truncated compact-WY parametrization of matrices with orthonormal columns.

An N x M matrix with orthonormal columns (M < N) is exactly the first M
columns of some N x N product of M reflections. Taking those columns
without forming the square matrix gives

    Omega = [I; 0] - U S^{-1} U1^T

with ``U`` the normalized vectors, ``U1`` its top M x M block, and ``S``
the usual triangular factor. The map is surjective; its constructive
inverse peels one column per reflection, exactly like the square case.

Also here: the convolution-kernel reshape that places a transition kernel
on the column-orthonormal manifold, and the induced non-expansiveness check
for the recurrent convolution.
"""

from __future__ import annotations

import numpy as np

from .cwy import build_factors, striu
from .errors import (
    NotOnManifold,
    RequiresStrictTruncation,
    ShapeMismatch,
)
from .householder import HouseholderStack, _reduce_column
from .linalg import spectral_norm, triangular_solve


def stiefel_residual(omega: np.ndarray) -> float:
    """``||Omega^T Omega - I||_F``, the distance from column orthonormality."""
    omega = np.asarray(omega, dtype=float)
    return float(np.linalg.norm(omega.T @ omega - np.eye(omega.shape[1])))


def gamma(stack: HouseholderStack) -> np.ndarray:
    """Map M reflection vectors to an N x M column-orthonormal matrix.

    Equals the first M columns of the full N x N reflection product, but
    that square matrix is never formed: only the skinny factors and an
    M x M triangular solve are used.

    Raises:
        RequiresStrictTruncation: unless L = M < N.
    """
    n, m = stack.n, stack.l
    if m >= n:
        raise RequiresStrictTruncation(
            f"truncated parametrization needs M < N, got M = {m}, N = {n}"
        )
    factors = build_factors(stack)
    u1t = factors.u[:m, :].T
    omega = -factors.u @ triangular_solve(factors.s, u1t)
    omega[:m, :] += np.eye(m)
    return omega


def decompose_stiefel(omega: np.ndarray) -> HouseholderStack:
    """Recover M reflection vectors whose truncated map reproduces ``omega``.

    Column-by-column reduction: each reflection sends the current leading
    column to e1, the eliminated vector is stored padded with leading
    zeros, and the trailing block shrinks by one row and column. The block
    shape is verified after every reflection and the routine aborts with
    diagnostics instead of silently degrading.

    Raises:
        NotOnManifold: if columns are not orthonormal within 1e-10 * M.
        RequiresStrictTruncation: for square input.
        DecompositionDrift: if a reflection fails to reduce its column.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 2 or omega.shape[0] < omega.shape[1]:
        raise ShapeMismatch(f"expected a tall N x M matrix, got {omega.shape}")
    n, m = omega.shape
    if m >= n:
        raise RequiresStrictTruncation(
            f"decomposition targets the truncated map, needs M < N, got {omega.shape}"
        )
    residual = stiefel_residual(omega)
    if residual > 1e-10 * max(1.0, float(m)):
        raise NotOnManifold(f"||Omega^T Omega - I||_F = {residual:.3e} for M = {m}")
    vectors = np.zeros((m, n))
    work = omega.copy()
    for k in range(m):
        v, reduced = _reduce_column(work, tol=1e-9)
        vectors[k, k:] = v
        work = reduced[1:, 1:]
    return HouseholderStack(vectors)


def gamma_grad(stack: HouseholderStack, upstream: np.ndarray) -> list[np.ndarray]:
    """Adjoint of the truncated map with respect to the raw vectors.

    ``upstream`` is ``df/dOmega`` (N x M). Mirrors the square-case adjoint
    with the extra top-block selection; gradients stay orthogonal to their
    vectors, so the SGD norm-monotonicity argument carries over unchanged.
    """
    n, m = stack.n, stack.l
    if m >= n:
        raise RequiresStrictTruncation(
            f"truncated parametrization needs M < N, got M = {m}, N = {n}"
        )
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != (n, m):
        raise ShapeMismatch(f"upstream shape {upstream.shape} != ({n}, {m})")
    factors = build_factors(stack)
    u = factors.u
    u1 = u[:m, :]
    t_inv = triangular_solve(factors.s, np.eye(m))
    ybar = -upstream
    ubar = ybar @ u1 @ t_inv.T
    ubar[:m, :] += ybar.T @ u @ t_inv
    tbar = u.T @ ybar @ u1
    sbar = -t_inv.T @ tbar @ t_inv.T
    gbar = striu(sbar)
    ubar = ubar + u @ (gbar + gbar.T)
    from .cwy import _chain_normalization

    return _chain_normalization(stack, factors, ubar)


def reshape_kernel(kernel: np.ndarray) -> np.ndarray:
    """Flatten a (q, q, f, f) transition kernel to its (q^2 f, f) matrix.

    Row ``l*q*f + p*f + i`` of the result holds kernel entry (l, p, i, :).
    The reshape is its own inverse through :func:`unreshape_kernel`.

    Raises:
        ShapeMismatch: unless the kernel is square with equal channel counts.
    """
    kernel = np.asarray(kernel, dtype=float)
    if kernel.ndim != 4 or kernel.shape[0] != kernel.shape[1]:
        raise ShapeMismatch(f"expected (q, q, f_in, f_out), got {kernel.shape}")
    q, _, f_in, f_out = kernel.shape
    if f_in != f_out:
        raise ShapeMismatch(
            f"transition kernel needs f_in == f_out, got {f_in} != {f_out}"
        )
    return kernel.reshape(q * q * f_out, f_out).copy()


def unreshape_kernel(matrix: np.ndarray, q: int, f_out: int) -> np.ndarray:
    """Inverse of :func:`reshape_kernel`."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (q * q * f_out, f_out):
        raise ShapeMismatch(
            f"expected ({q * q * f_out}, {f_out}), got {matrix.shape}"
        )
    return matrix.reshape(q, q, f_out, f_out).copy()


def conv2d_same(kernel: np.ndarray, state: np.ndarray) -> np.ndarray:
    """Direct zero-padded same-size convolution of an (h, w, f_in) state.

    Deliberately a plain patch-by-patch implementation (no FFT): this is a
    verification path, not a performance path. Kernel size must be odd.
    """
    kernel = np.asarray(kernel, dtype=float)
    state = np.asarray(state, dtype=float)
    if kernel.ndim != 4 or state.ndim != 3:
        raise ShapeMismatch("expected (q, q, f_in, f_out) kernel and (h, w, f_in) state")
    q = kernel.shape[0]
    if kernel.shape[1] != q or q % 2 == 0:
        raise ShapeMismatch(f"kernel must be square with odd size, got {kernel.shape}")
    if kernel.shape[2] != state.shape[2]:
        raise ShapeMismatch(
            f"kernel input channels {kernel.shape[2]} != state channels {state.shape[2]}"
        )
    h, w, f_in = state.shape
    r = (q - 1) // 2
    padded = np.zeros((h + 2 * r, w + 2 * r, f_in))
    padded[r:r + h, r:r + w, :] = state
    out = np.zeros((h, w, kernel.shape[3]))
    for i in range(h):
        for j in range(w):
            patch = padded[i:i + q, j:j + q, :]
            out[i, j, :] = np.tensordot(patch, kernel, axes=([0, 1, 2], [0, 1, 2]))
    return out


def check_conv_bound(kernel: np.ndarray, state: np.ndarray) -> tuple[float, float, bool]:
    """Evaluate both sides of the recurrent-convolution energy bound.

    Computes the convolution directly and returns
    ``(||K * G||_F^2, q^2 ||K_hat||_2^2 ||G||_F^2, lhs <= rhs)`` with 1e-9
    relative slack on the comparison. When the scaled flattened kernel has
    orthonormal columns the right-hand side reduces to ``||G||_F^2``, which
    makes the transition non-expansive.
    """
    khat = reshape_kernel(kernel)
    out = conv2d_same(kernel, state)
    lhs = float(np.sum(out * out))
    q = kernel.shape[0]
    if np.all(khat == 0.0):
        operator_norm = 0.0
    else:
        operator_norm = spectral_norm(khat)
    rhs = q * q * operator_norm ** 2 * float(np.sum(state * state))
    holds = lhs <= rhs + 1e-9 * max(lhs, rhs, 1.0)
    return lhs, rhs, holds


def conv_step(kernel: np.ndarray, k_in: np.ndarray, bias: np.ndarray,
              state: np.ndarray, observation: np.ndarray,
              nonlinearity: str = "relu") -> np.ndarray:
    """One recurrent-convolution update ``sigma(K*G + B + K_in*X)``.

    ``bias`` has one entry per output channel and is broadcast over all
    spatial positions. Provided as a composition helper for demos; training
    loops for the convolutional unit are out of scope here.
    """
    from .cwy import NONLINEARITIES

    try:
        sigma = NONLINEARITIES[nonlinearity]
    except KeyError:
        raise ShapeMismatch(f"unknown nonlinearity {nonlinearity!r}") from None
    bias = np.asarray(bias, dtype=float)
    pre = conv2d_same(kernel, state) + bias[None, None, :]
    pre = pre + conv2d_same(k_in, observation)
    return sigma(pre)
