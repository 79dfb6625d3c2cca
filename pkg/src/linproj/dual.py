"""Entropy-regularized projection: primal/dual objectives and gradients.

The projection of a score vector c onto {x : A x = b, 0 <= x <= u}
minimizes f(x) = -c^T x + (1/theta) * sum_j H(x_j / u_j) where H is the
binary entropy integrand r log r + (1-r) log(1-r).  Its Lagrange dual in
the equality multipliers y is smooth and unconstrained; the primal
minimizer for a given y has the closed form x(y) = u * sigmoid(theta * u *
(c + A^T y)), which is always strictly interior to the box.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .canonical import StandardProblem
from .errors import ContractViolation
from .operators import LinearOperator

# Clamp ratio for entropy evaluation; 0 log 0 -> 0 in the limit.
_ENTROPY_CLAMP = 1e-15


@dataclass(frozen=True)
class EntropicProblem:
    """A StandardProblem plus the cost vector and inverse temperature."""

    std: StandardProblem
    c: np.ndarray
    theta: float

    def __post_init__(self):
        if self.theta <= 0:
            raise ContractViolation("theta must be strictly positive")
        c = np.asarray(self.c, dtype=np.float64)
        if len(c) != self.std.n:
            raise ContractViolation("cost vector length mismatch")
        if not np.all(np.isfinite(c)):
            raise ContractViolation("cost vector must be finite")
        object.__setattr__(self, "c", c)

    @property
    def a(self) -> LinearOperator:
        return self.std.a

    @property
    def b(self):
        return self.std.b

    @property
    def u(self):
        return self.std.u

    @property
    def m(self):
        return self.std.m

    @property
    def n(self):
        return self.std.n


def _check_dual(ep, y):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (ep.m,):
        raise ContractViolation(f"dual vector must have length {ep.m}")
    if not np.all(np.isfinite(y)):
        raise ContractViolation("dual vector must be finite")
    return y


def log_sigmoid(z):
    """Numerically stable log(sigmoid(z)) = -log(1 + exp(-z))."""
    return -np.logaddexp(0.0, -np.asarray(z, dtype=np.float64))


def sigmoid(z):
    return np.exp(log_sigmoid(z))


def dual_logits(ep: EntropicProblem, y):
    """The saturation-relevant argument z = theta * u * (c + A^T y)."""
    return ep.theta * ep.u * (ep.c + ep.a.rmatvec(y))


def primal_from_dual(ep: EntropicProblem, y):
    """Closed-form primal minimizer x(y); strictly inside (0, u)."""
    y = _check_dual(ep, y)
    return ep.u * sigmoid(dual_logits(ep, y))


def dual_objective(ep: EntropicProblem, y):
    """The value being minimized, -g(y)."""
    y = _check_dual(ep, y)
    z = dual_logits(ep, y)
    return float(-np.sum(log_sigmoid(-z)) / ep.theta - ep.b @ y)


def dual_gradient(ep: EntropicProblem, y):
    """Gradient of -g: the equality residual A x(y) - b."""
    return ep.a.matvec(primal_from_dual(ep, y)) - ep.b


def primal_objective(ep: EntropicProblem, x):
    """f(x) = -c^T x + (1/theta) sum binary entropies of x/u."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ep.n,):
        raise ContractViolation("primal vector length mismatch")
    r = x / ep.u
    if np.any(r < -_ENTROPY_CLAMP * 2) or np.any(r > 1 + _ENTROPY_CLAMP * 2):
        raise ContractViolation("primal point lies outside the box")
    r = np.clip(r, _ENTROPY_CLAMP, 1.0 - _ENTROPY_CLAMP)
    ent = r * np.log(r) + (1.0 - r) * np.log(1.0 - r)
    return float(-ep.c @ x + np.sum(ent) / ep.theta)


def stationarity_residual(ep: EntropicProblem, y):
    """Elementwise stationarity defect in logit space.

    At x = x(y) the first-order condition reads
    theta * u * (c + A^T y) = logit(x / u); evaluating the difference in
    logit space avoids cancellation when the sigmoid saturates.
    """
    y = _check_dual(ep, y)
    z = dual_logits(ep, y)
    # log r = log sigmoid(z) and log(1 - r) = log sigmoid(-z); taking logs of
    # the rounded ratio x/u instead would lose the tail once sigmoid saturates.
    return z - (log_sigmoid(z) - log_sigmoid(-z))


@dataclass(frozen=True)
class SmoothnessConstants:
    """Analytic curvature bounds of the entropic objective pair."""

    strong_convexity: float
    lipschitz: float


def smoothness_constants(ep: EntropicProblem, norm_estimate: float) -> SmoothnessConstants:
    """Strong convexity of f and Lipschitz constant of the dual gradient.

    strong_convexity = 4 / (theta * max(u)^2);
    lipschitz        = theta * max(u)^2 * ||A||_2^2 / 4.
    """
    if norm_estimate < 0:
        raise ContractViolation("norm estimate must be non-negative")
    umax2 = float(np.max(ep.u)) ** 2
    return SmoothnessConstants(
        strong_convexity=4.0 / (ep.theta * umax2),
        lipschitz=ep.theta * umax2 * norm_estimate**2 / 4.0,
    )
