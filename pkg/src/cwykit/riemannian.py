"""Riemannian gradient descent on matrices with orthonormal columns.

The tangent space at Omega is ``{Z : Z^T Omega skew}``. Under either the
canonical or the Euclidean inner product, the projected gradient has the
form ``Z = A Omega`` for a skew matrix ``A`` that factors as ``B C^T`` with
skinny B, C (2M or 3M columns). The Cayley retraction of such a low-rank
skew direction needs only a D x D solve:

    Cayley(A) Omega = Omega - B (I + C^T B / 2)^{-1} (C^T Omega)

so the N x N matrix ``A`` is never materialized. A QR-based retraction is
provided as the cheaper first-order-equivalent alternative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, SolveFailure
from .linalg import qf

METRICS = ("canonical", "euclidean")
RETRACTIONS = ("cayley", "qr")


@dataclass(frozen=True)
class LowRankSkew:
    """Factors ``(b, c)`` of a skew matrix ``A = b @ c.T``, N x D each.

    Stored unscaled: the step size is folded into ``b`` inside the Cayley
    retraction, which keeps a single scaling site and avoids double-scaling
    bugs.
    """

    b: np.ndarray
    c: np.ndarray

    @property
    def d(self) -> int:
        return self.b.shape[1]


def tangent_residual(omega: np.ndarray, z: np.ndarray) -> float:
    """``||Z^T Omega + Omega^T Z||_F``; zero iff Z is tangent at Omega."""
    zto = np.asarray(z).T @ np.asarray(omega)
    return float(np.linalg.norm(zto + zto.T))


def canonical_inner(omega: np.ndarray, z1: np.ndarray, z2: np.ndarray) -> float:
    """Canonical tangent inner product ``Tr(Z1^T (I - Omega Omega^T / 2) Z2)``."""
    return float(np.trace(z1.T @ z2) - 0.5 * np.trace((z1.T @ omega) @ (omega.T @ z2)))


def project_gradient(omega: np.ndarray, euclid_grad: np.ndarray,
                     metric: str = "canonical") -> tuple[np.ndarray, LowRankSkew]:
    """Project an ambient gradient onto the tangent space at ``omega``.

    Returns the tangent direction ``Z = A Omega`` together with the skinny
    factors of ``A``: for the canonical metric ``A = G Omega^T - Omega G^T``
    (D = 2M); the Euclidean metric adds the correction block
    ``Omega E Omega^T / 2`` with ``E = G^T Omega - Omega^T G`` (D = 3M).
    ``Z`` is evaluated through the factors, never through the dense ``A``.
    """
    omega = np.asarray(omega, dtype=float)
    g = np.asarray(euclid_grad, dtype=float)
    if omega.shape != g.shape or omega.ndim != 2:
        raise ShapeMismatch(f"gradient shape {g.shape} != point shape {omega.shape}")
    if metric == "canonical":
        b = np.concatenate([g, omega], axis=1)
        c = np.concatenate([omega, -g], axis=1)
    elif metric == "euclidean":
        e = g.T @ omega - omega.T @ g
        b = np.concatenate([g, omega, 0.5 * (omega @ e)], axis=1)
        c = np.concatenate([omega, -g, omega], axis=1)
    else:
        raise ShapeMismatch(f"unknown metric {metric!r}, expected one of {METRICS}")
    factors = LowRankSkew(b=b, c=c)
    z = factors.b @ (factors.c.T @ omega)
    return z, factors


def cayley_retract_smw(omega: np.ndarray, factors: LowRankSkew,
                       eta: float) -> np.ndarray:
    """Cayley retraction of ``eta * A`` evaluated through the skinny factors.

    Solves one dense D x D system (LU with partial pivoting; the system is
    provably nonsingular for genuinely skew ``A``) instead of the N x N
    Cayley solve. eta = 0 returns ``omega`` unchanged. For a gradient
    direction this *descends*: Cayley(eta A) Omega ~ Omega - eta A Omega.

    Raises:
        SolveFailure: if the D x D system is numerically singular, which
            signals corrupted factors rather than an expected condition.
    """
    omega = np.asarray(omega, dtype=float)
    b = eta * factors.b
    c = factors.c
    system = np.eye(b.shape[1]) + 0.5 * (c.T @ b)
    try:
        x = np.linalg.solve(system, c.T @ omega)
    except np.linalg.LinAlgError as exc:
        raise SolveFailure(
            "retraction system singular; low-rank factors do not represent "
            "a skew matrix"
        ) from exc
    return omega - b @ x


def qr_retract(omega: np.ndarray, direction: np.ndarray, eta: float) -> np.ndarray:
    """QR retraction: the sign-normalized Q factor of ``omega + eta * direction``.

    The retraction argument is the moved point, so eta = 0 (or a zero
    direction) returns ``omega`` up to the QR sign normalization, which is
    the identity for an orthonormal input.

    Raises:
        RankDeficient: propagated from the factorization.
    """
    omega = np.asarray(omega, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if direction.shape != omega.shape:
        raise ShapeMismatch(f"direction shape {direction.shape} != {omega.shape}")
    q, _ = qf(omega + eta * direction)
    return q


def rgd_step(omega: np.ndarray, euclid_grad: np.ndarray, metric: str = "canonical",
             retraction: str = "cayley", eta: float = 0.1) -> np.ndarray:
    """One descent step: project the gradient, then retract.

    The Cayley map consumes the projected-gradient factors directly (its
    expansion already carries the minus sign); the QR path moves along the
    negated tangent direction. Both agree to first order in eta.
    """
    z, factors = project_gradient(omega, euclid_grad, metric)
    if retraction == "cayley":
        return cayley_retract_smw(omega, factors, eta)
    if retraction == "qr":
        return qr_retract(omega, -z, eta)
    raise ShapeMismatch(f"unknown retraction {retraction!r}, expected one of {RETRACTIONS}")
