"""Compact-WY representation of a product of Householder reflections.

A product of L reflections in dimension N equals ``I - U S^{-1} U^T`` where
``U`` holds the normalized reflection vectors as columns and
``S = I/2 + striu(U^T U)`` is upper-triangular with exact 1/2 diagonal
(``striu`` zeroes the diagonal and everything below). The factored form
applies the whole product with two skinny matrix products and one
triangular solve, with no sequential pass over the reflections.

This module builds the factors, applies and materializes the operator, runs
the recurrent rollout on the factored path, and computes the analytic
adjoint with respect to the raw reflection vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import householder
from .errors import ShapeMismatch
from .householder import HouseholderStack
from .linalg import triangular_solve

NONLINEARITIES = {
    "tanh": np.tanh,
    "relu": lambda y: np.maximum(y, 0.0),
    "abs": np.abs,
    "identity": lambda y: y,
}


@dataclass
class CWYFactors:
    """Precomputed apply state: unit-column ``u`` (N x L), upper-triangular
    ``s`` (L x L, diagonal exactly 1/2), and the original vector norms kept
    for the gradient chain rule.

    Treated as immutable after construction. The explicit inverse of ``s``
    is cached lazily for the rollout path, where it is reused every step;
    one-shot applies go through triangular solves instead.
    """

    u: np.ndarray
    s: np.ndarray
    source_norms: np.ndarray
    _s_inv: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def l(self) -> int:
        return self.u.shape[1]

    def s_inverse(self) -> np.ndarray:
        if self._s_inv is None:
            self._s_inv = triangular_solve(self.s, np.eye(self.l))
        return self._s_inv


def striu(x: np.ndarray) -> np.ndarray:
    """Zero out the diagonal and lower triangle of ``x``."""
    return np.triu(x, k=1)


def build_factors(stack: HouseholderStack) -> CWYFactors:
    """Assemble the compact-WY factors (U, S) from a reflection stack.

    Cost is dominated by the L x L Gram product of the normalized vectors.
    """
    norms = stack.norms()
    u = (stack.vectors / norms[:, None]).T
    s = striu(u.T @ u) + 0.5 * np.eye(stack.l)
    return CWYFactors(u=u, s=s, source_norms=norms)


def apply(factors: CWYFactors, x: np.ndarray) -> np.ndarray:
    """Apply the reflection product to ``x`` without materializing it.

    ``x - U @ solve(S, U^T x)``, batched over the columns of ``x``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != factors.n:
        raise ShapeMismatch(f"operand rows {x.shape[0]} != dimension {factors.n}")
    return x - factors.u @ triangular_solve(factors.s, factors.u.T @ x)


def materialize(factors: CWYFactors) -> np.ndarray:
    """Form the dense N x N orthogonal matrix ``I - U S^{-1} U^T``."""
    return np.eye(factors.n) - factors.u @ triangular_solve(factors.s, factors.u.T)


def rollout(factors: CWYFactors, h0: np.ndarray, inputs: np.ndarray | None = None,
            v_in: np.ndarray | None = None, b: np.ndarray | None = None,
            nonlinearity: str = "tanh", steps: int | None = None) -> np.ndarray:
    """Run the recurrence ``h_t = sigma(Q h_{t-1} + b + V x_t)`` for T steps.

    Every step applies the reflection product through the factored
    three-step path (``u_t = U^T h``, ``v_t = S^{-1} u_t``,
    ``y_t = h - U v_t``); the dense transition matrix is never formed.

    Args:
        factors: prebuilt compact-WY factors.
        h0: initial hidden state, length N.
        inputs: optional (T, N_in) observed sequence; defines T when given.
        v_in: (N, N_in) input transformation, required with ``inputs``.
        b: optional bias, length N.
        nonlinearity: one of "tanh", "relu", "abs", "identity".
        steps: number of steps when no inputs are given.

    Returns:
        (T, N) array of hidden states ``h_1 .. h_T``.
    """
    h = np.asarray(h0, dtype=float)
    if h.shape != (factors.n,):
        raise ShapeMismatch(f"h0 shape {h.shape} != ({factors.n},)")
    try:
        sigma = NONLINEARITIES[nonlinearity]
    except KeyError:
        raise ShapeMismatch(f"unknown nonlinearity {nonlinearity!r}") from None
    drive = None
    if inputs is not None:
        inputs = np.asarray(inputs, dtype=float)
        if v_in is None:
            raise ShapeMismatch("inputs given without an input transformation")
        v_in = np.asarray(v_in, dtype=float)
        if v_in.shape != (factors.n, inputs.shape[1]):
            raise ShapeMismatch(
                f"v_in shape {v_in.shape} != ({factors.n}, {inputs.shape[1]})"
            )
        drive = inputs @ v_in.T
        total = inputs.shape[0]
    elif steps is not None:
        total = int(steps)
    else:
        raise ShapeMismatch("need inputs or an explicit step count")
    bias = np.zeros(factors.n) if b is None else np.asarray(b, dtype=float)
    u = factors.u
    s_inv = factors.s_inverse()
    states = np.zeros((total, factors.n))
    for t in range(total):
        y = h - u @ (s_inv @ (u.T @ h)) + bias
        if drive is not None:
            y = y + drive[t]
        h = sigma(y)
        states[t] = h
    return states


def grad(stack: HouseholderStack, upstream: np.ndarray) -> list[np.ndarray]:
    """Adjoint of the map from raw vectors to the materialized matrix.

    Given ``upstream = df/dQ`` for ``Q = I - U S^{-1} U^T``, reverse-mode
    differentiates through the factor construction and returns ``df/dv^(l)``
    for every l. Each returned gradient is orthogonal to its vector, which
    is what makes the vector norms non-decreasing under plain SGD.
    """
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != (stack.n, stack.n):
        raise ShapeMismatch(f"upstream shape {upstream.shape} != ({stack.n}, {stack.n})")
    factors = build_factors(stack)
    u = factors.u
    t_inv = triangular_solve(factors.s, np.eye(stack.l))
    ybar = -upstream
    ubar = ybar @ u @ t_inv.T + ybar.T @ u @ t_inv
    tbar = u.T @ ybar @ u
    sbar = -t_inv.T @ tbar @ t_inv.T
    gbar = striu(sbar)
    ubar = ubar + u @ (gbar + gbar.T)
    return _chain_normalization(stack, factors, ubar)


def _chain_normalization(stack: HouseholderStack, factors: CWYFactors,
                         ubar: np.ndarray) -> list[np.ndarray]:
    """Back-propagate column gradients of U through v -> v / ||v||."""
    out = []
    for i in range(stack.l):
        ui = factors.u[:, i]
        ub = ubar[:, i]
        out.append((ub - float(ui @ ub) * ui) / factors.source_norms[i])
    return out


def init_from_orthogonal(q: np.ndarray) -> HouseholderStack:
    """Reflection vectors reproducing a given orthogonal matrix.

    Delegates to the constructive decomposition; building factors from the
    result materializes back to ``q`` up to roundoff. The usual recipe for
    a rotation-like start is to exponentiate a random skew matrix (even N)
    and feed it through here.
    """
    return householder.decompose(q)
