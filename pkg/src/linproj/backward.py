"""Implicit differentiation of the projection through its optimality condition.

At the optimum the dual variables satisfy h(y) = A x(y) - b = 0.  The
Jacobian dh/dy = A diag(w) A^T with w = theta * x * (u - x) is symmetric
positive semi-definite and only ever applied as a matvec, so conjugate
gradients recover the adjoint p = dl/dh; all data gradients then follow
from closed-form expressions in (x, y, w, p).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dual import EntropicProblem, dual_gradient, primal_from_dual
from .errors import ContractViolation, SingularKkt
from .operators import LinearOperator
from .solver import Solution

CG_TOL = 1e-10
_STAGNATION_WINDOW = 10


@dataclass(frozen=True)
class AdjointSeed:
    """Downstream loss sensitivities with respect to x and (optionally) y."""

    dl_dx: np.ndarray
    dl_dy: np.ndarray | None = None

    def resolved(self, n, m):
        dx = np.asarray(self.dl_dx, dtype=np.float64)
        dy = (
            np.zeros(m)
            if self.dl_dy is None
            else np.asarray(self.dl_dy, dtype=np.float64)
        )
        if dx.shape != (n,) or dy.shape != (m,):
            raise ContractViolation("adjoint seed shape mismatch")
        if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dy))):
            raise ContractViolation("adjoint seed must be finite")
        return dx, dy


@dataclass(frozen=True)
class GradientBundle:
    """Loss gradients with respect to all problem data.

    ``dl_da`` is materialized on the sparsity pattern of A (a full matrix in
    dense mode) and wrapped in the same operator class as A.
    """

    dl_da: LinearOperator
    dl_db: np.ndarray
    dl_dc: np.ndarray
    dl_du: np.ndarray


class KktOperator:
    """The matvec-only map v -> A diag(w) A^T v, with w = theta*x*(u-x)."""

    def __init__(self, a: LinearOperator, weights, shift: float = 0.0):
        self.a = a
        self.weights = np.asarray(weights, dtype=np.float64)
        if np.any(self.weights <= 0):
            raise ContractViolation("KKT weights must be strictly positive")
        self.shift = shift
        self.m = a.rows

    @classmethod
    def from_solution(cls, ep: EntropicProblem, x):
        return cls(ep.a, ep.theta * x * (ep.u - x))

    def matvec(self, v):
        out = self.a.matvec(self.weights * self.a.rmatvec(v))
        if self.shift:
            out = out + self.shift * v
        return out

    def trace_estimate(self):
        return self.a.weighted_gram_trace(self.weights)


def _cg_once(op, rhs, tol, max_iter):
    """Plain CG from zero; returns (z, converged, best_z, best_res)."""
    target = tol * max(1.0, float(np.linalg.norm(rhs)))
    z = np.zeros_like(rhs)
    r = rhs.copy()
    p = r.copy()
    rs = float(r @ r)
    best_z, best_res = z.copy(), float(np.sqrt(rs))
    if best_res <= target:
        return z, True, best_z, best_res
    stagnant = 0
    prev_res = best_res
    for _ in range(max_iter):
        ap = op.matvec(p)
        pap = float(p @ ap)
        if pap <= 0:
            break  # lost positive-definiteness numerically
        alpha = rs / pap
        z = z + alpha * p
        r = r - alpha * ap
        rs_new = float(r @ r)
        res = float(np.sqrt(rs_new))
        if res < best_res:
            best_z, best_res = z.copy(), res
        if res <= target:
            # Recurrence residual can drift; confirm with the true residual.
            true_res = float(np.linalg.norm(op.matvec(z) - rhs))
            if true_res <= target:
                return z, True, best_z, best_res
        stagnant = stagnant + 1 if res >= prev_res else 0
        if stagnant >= _STAGNATION_WINDOW:
            break
        prev_res = res
        p = r + (rs_new / rs) * p
        rs = rs_new
    return best_z, False, best_z, best_res


def cg_solve(op: KktOperator, rhs, tol: float = CG_TOL, max_iter: int | None = None):
    """Solve op(z) = rhs by conjugate gradients.

    Retries once with a small Tikhonov shift when the iteration stagnates
    (rank-deficient A); raises SingularKkt with the best iterate otherwise.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape != (op.m,):
        raise ContractViolation("cg rhs length mismatch")
    if not np.all(np.isfinite(rhs)):
        raise ContractViolation("cg rhs must be finite")
    if tol <= 0:
        raise ContractViolation("cg tolerance must be positive")
    if max_iter is None:
        max_iter = max(2 * op.m, 8)
    if op.m == 0:
        return rhs.copy()

    z, ok, best_z, best_res = _cg_once(op, rhs, tol, max_iter)
    if ok:
        return z
    mu = 1e-12 * op.trace_estimate() / op.m
    shifted = KktOperator(op.a, op.weights, shift=max(mu, 1e-300))
    z, ok, best_z2, best_res2 = _cg_once(shifted, rhs, tol, max_iter)
    if ok:
        # The contract is on the unshifted operator; the shift only helps
        # when the system was consistent to begin with.
        target = tol * max(1.0, float(np.linalg.norm(rhs)))
        true_res = float(np.linalg.norm(op.matvec(z) - rhs))
        if true_res <= target:
            return z
        best_res2 = true_res
        best_z2 = z
    if best_res2 < best_res:
        best_z, best_res = best_z2, best_res2
    raise SingularKkt(
        f"conjugate gradients did not reach tolerance (best residual {best_res:.3e})",
        best_iterate=best_z,
    )


def kkt_residual_h(ep: EntropicProblem, y):
    """The implicit function h(y) = A x(y) - b being differentiated."""
    return dual_gradient(ep, y)


def backward(
    ep: EntropicProblem,
    sol: Solution,
    seed: AdjointSeed,
    tol: float = CG_TOL,
) -> GradientBundle:
    """Exact gradients of the loss w.r.t. (A, b, c, u) at a converged solve."""
    if not sol.converged:
        raise ContractViolation("backward requires a converged forward solution")
    dl_dx, dl_dy = seed.resolved(ep.n, ep.m)

    # Recompute x from the dual so that x, y, and w are exactly consistent.
    x = primal_from_dual(ep, sol.y)
    y = np.asarray(sol.y, dtype=np.float64)
    w = ep.theta * x * (ep.u - x)

    q = ep.a.matvec(dl_dx * w) + dl_dy
    p = cg_solve(KktOperator(ep.a, w), q, tol=tol)
    r = ep.a.rmatvec(p)

    adj = dl_dx - r
    neg_slope = -ep.c - ep.a.rmatvec(y)  # the -c - A^T y factor of du terms
    du_factor = (x - w * neg_slope) / ep.u

    return GradientBundle(
        dl_da=ep.a.pattern_outer([(y, adj * w), (-p, x)]),
        dl_db=p,
        dl_dc=adj * w,
        dl_du=adj * du_factor,
    )
