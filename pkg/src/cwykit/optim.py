"""Stochastic gradient descent over raw reflection vectors.

The schedule is the plain ``k^{-0.5}`` step on the unnormalized vectors,
updating every vector simultaneously from the same materialized point and
the same noise draw. Because each vector's gradient is orthogonal to the
vector itself, the vector norms never decrease, so the parametrization can
never collapse onto a zero vector; the running minimum of the summed
squared gradient norms is the convergence diagnostic.

Desk-scale objectives: orthogonal Procrustes on the square group and the
trace objective on column-orthonormal matrices, both optionally with
seeded additive Gaussian gradient noise (mean zero, hence unbiased).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import cwy, tcwy
from .errors import ShapeMismatch, ZeroVector
from .householder import HouseholderStack
from .linalg import SkewParam, matrix_exp

CSV_COLUMNS = ("k", "objective", "sum_sq_grad_norm", "min_so_far", "min_vector_norm")


@dataclass(frozen=True)
class StochasticObjective:
    """Objective triple: exact value, exact gradient, and a stochastic
    gradient whose expectation equals the exact one.

    The noisy callable owns its generator, so a fixed construction seed
    yields a bitwise-reproducible draw sequence.
    """

    evaluate: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    noisy_gradient: Callable[[np.ndarray], np.ndarray]


def _with_noise(gradient: Callable[[np.ndarray], np.ndarray], sigma: float,
                seed: int) -> Callable[[np.ndarray], np.ndarray]:
    if sigma == 0.0:
        return gradient
    rng = np.random.default_rng(seed)

    def noisy(point: np.ndarray) -> np.ndarray:
        return gradient(point) + sigma * rng.standard_normal(point.shape)

    return noisy


def procrustes_objective(a: np.ndarray, b: np.ndarray, noise_sigma: float = 0.0,
                         seed: int = 0) -> StochasticObjective:
    """``f(Q) = ||Q A - B||_F^2`` with gradient ``2 (Q A - B) A^T``.

    Additive Gaussian gradient noise of scale ``noise_sigma`` keeps the
    estimator unbiased with bounded second moment on the compact domain.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 2:
        raise ShapeMismatch(f"need equal shapes, got {a.shape} and {b.shape}")

    def evaluate(q: np.ndarray) -> float:
        r = q @ a - b
        return float(np.sum(r * r))

    def gradient(q: np.ndarray) -> np.ndarray:
        return 2.0 * (q @ a - b) @ a.T

    return StochasticObjective(evaluate, gradient, _with_noise(gradient, noise_sigma, seed))


def trace_objective(target: np.ndarray, noise_sigma: float = 0.0,
                    seed: int = 0) -> StochasticObjective:
    """``f(Omega) = -Tr(M^T Omega)``, minimized at the polar factor of M.

    The optimum value is minus the sum of the singular values of the
    target. Gradient is the constant ``-M``.
    """
    target = np.asarray(target, dtype=float)

    def evaluate(omega: np.ndarray) -> float:
        return -float(np.sum(target * omega))

    def gradient(omega: np.ndarray) -> np.ndarray:
        return -target + 0.0 * omega

    return StochasticObjective(evaluate, gradient, _with_noise(gradient, noise_sigma, seed))


@dataclass
class RunHistory:
    """Per-iteration diagnostics recorded before each update."""

    k: list[int] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    sum_sq_grad_norm: list[float] = field(default_factory=list)
    min_so_far: list[float] = field(default_factory=list)
    min_vector_norm: list[float] = field(default_factory=list)

    def record(self, k: int, objective: float, sum_sq: float,
               min_vector_norm: float) -> None:
        best = min(self.min_so_far[-1], sum_sq) if self.min_so_far else sum_sq
        self.k.append(k)
        self.objective.append(objective)
        self.sum_sq_grad_norm.append(sum_sq)
        self.min_so_far.append(best)
        self.min_vector_norm.append(min_vector_norm)

    def rows(self):
        return zip(self.k, self.objective, self.sum_sq_grad_norm,
                   self.min_so_far, self.min_vector_norm)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for k, obj, ssq, best, mn in self.rows():
                fh.write(f"{k},{obj:.17g},{ssq:.17g},{best:.17g},{mn:.17g}\n")

    def loglog_slope(self, k_lo: int, k_hi: int) -> float:
        """Least-squares slope of log(min_so_far) against log(k) on a window.

        Used for the asymptotic-rate inspection; positive diagnostics values
        are required, so iterations at exactly zero are excluded.
        """
        ks, ys = [], []
        for k, best in zip(self.k, self.min_so_far):
            if k_lo <= k <= k_hi and best > 0.0:
                ks.append(math.log(k))
                ys.append(math.log(best))
        if len(ks) < 2:
            return 0.0
        slope = np.polyfit(ks, ys, 1)[0]
        return float(slope)


@dataclass
class SgdState:
    """Optimizer state: the current stack, the 1-based step counter, the
    diagnostics history, and the initial minimum vector norm that later
    iterates may never undercut (beyond roundoff)."""

    stack: HouseholderStack
    k: int = 1
    base_lr: float = 1.0
    history: RunHistory = field(default_factory=RunHistory)
    initial_min_norm: float = field(init=False)

    def __post_init__(self):
        self.initial_min_norm = float(np.min(self.stack.norms()))


def random_stack(n: int, l: int, rng: np.random.Generator) -> HouseholderStack:
    """Fresh start: iid standard-normal vectors, rejecting degenerate draws
    with norm below ``0.1 * sqrt(N)`` (probability about zero)."""
    rows = np.zeros((l, n))
    for i in range(l):
        while True:
            v = rng.standard_normal(n)
            if np.linalg.norm(v) >= 0.1 * math.sqrt(n):
                rows[i] = v
                break
    return HouseholderStack(rows)


def skew_exp_stack(n: int, rng: np.random.Generator) -> HouseholderStack:
    """Start from the exponential of a random skew matrix.

    The exponential lands in the rotation component, so this constructor
    only works for even N, where rotations are products of N reflections.
    """
    q = matrix_exp(SkewParam.random(n, rng))
    return cwy.init_from_orthogonal(q)


def _record_and_step(state: SgdState, objective: StochasticObjective,
                     point: np.ndarray, step_grads: list[np.ndarray],
                     diag_grads: list[np.ndarray]) -> SgdState:
    sum_sq = float(sum(g @ g for g in diag_grads))
    state.history.record(
        k=state.k,
        objective=objective.evaluate(point),
        sum_sq=sum_sq,
        min_vector_norm=float(np.min(state.stack.norms())),
    )
    eta = state.base_lr * state.k ** -0.5
    new_vectors = state.stack.vectors - eta * np.asarray(step_grads)
    new_norms = np.linalg.norm(new_vectors, axis=1)
    if float(np.min(new_norms)) < state.initial_min_norm - 1e-9:
        raise ZeroVector(
            f"vector norm {np.min(new_norms):.6e} fell below the initial "
            f"minimum {state.initial_min_norm:.6e} at step {state.k}; gradient "
            "orthogonality is violated"
        )
    state.stack = HouseholderStack(new_vectors)
    state.k += 1
    return state


def sgd_step(state: SgdState, objective: StochasticObjective) -> SgdState:
    """One update of every reflection vector on the square group.

    All gradients are taken at the same materialized point with a single
    noise draw, then all vectors move together with step
    ``base_lr * k^{-0.5}`` (base_lr = 1 is the schedule the convergence
    guarantee is stated for; other values are a demo convenience). The
    state is updated in place and returned.
    """
    q = cwy.materialize(cwy.build_factors(state.stack))
    noisy = objective.noisy_gradient(q)
    step_grads = cwy.grad(state.stack, noisy)
    exact = objective.gradient(q)
    diag_grads = step_grads if noisy is exact else cwy.grad(state.stack, exact)
    return _record_and_step(state, objective, q, step_grads, diag_grads)


def stiefel_sgd_step(state: SgdState, objective: StochasticObjective) -> SgdState:
    """Truncated-map analogue of :func:`sgd_step` on N x M points."""
    omega = tcwy.gamma(state.stack)
    noisy = objective.noisy_gradient(omega)
    step_grads = tcwy.gamma_grad(state.stack, noisy)
    exact = objective.gradient(omega)
    diag_grads = step_grads if noisy is exact else tcwy.gamma_grad(state.stack, exact)
    return _record_and_step(state, objective, omega, step_grads, diag_grads)


def _run(step: Callable[[SgdState, StochasticObjective], SgdState],
         state: SgdState, objective: StochasticObjective,
         max_iters: int, grad_tol: float) -> RunHistory:
    for _ in range(max_iters):
        step(state, objective)
        if state.history.min_so_far[-1] < grad_tol:
            break
    return state.history


def run(state: SgdState, objective: StochasticObjective, max_iters: int = 20000,
        grad_tol: float = 0.0) -> RunHistory:
    """Iterate :func:`sgd_step` until the running-min squared gradient norm
    drops below ``grad_tol`` or the iteration budget runs out.

    Returns the history, whose ``min_so_far`` column is the curve to
    inspect for the expected ``o(K^{-0.5+eps})`` decay.
    """
    return _run(sgd_step, state, objective, max_iters, grad_tol)


def stiefel_run(state: SgdState, objective: StochasticObjective,
                max_iters: int = 20000, grad_tol: float = 0.0) -> RunHistory:
    """Iterate :func:`stiefel_sgd_step`; same contract as :func:`run`."""
    return _run(stiefel_sgd_step, state, objective, max_iters, grad_tol)
