"""Finite-difference verification of the implicit backward pass.

The check differentiates the scalar loss l = seed_x . x* (+ seed_y . y*)
by central differences through full re-solves of the projection, one
perturbed problem per data coordinate, and compares against the implicit
gradients.  Re-solves warm-start from the base dual and are polished by a
damped Newton iteration on h(y) = 0 so that the FD truncation error is not
swamped by leftover forward error.
"""
from __future__ import annotations

import numpy as np

from .backward import AdjointSeed, GradientBundle, backward
from .canonical import StandardProblem
from .dual import EntropicProblem, dual_gradient, primal_from_dual
from .errors import ContractViolation
from .solver import SolverConfig, Status, solve

FD_STEP = 1e-5
FORWARD_EPS = 1e-10


def refine_dual(ep: EntropicProblem, y, tol=1e-13, max_iter=100):
    """Damped Newton on h(y) = 0 with the explicit dense Jacobian."""
    y = np.asarray(y, dtype=np.float64).copy()
    a_dense = ep.a.to_dense()
    for _ in range(max_iter):
        h = dual_gradient(ep, y)
        hn = float(np.linalg.norm(h))
        if hn <= tol:
            break
        x = primal_from_dual(ep, y)
        w = ep.theta * x * (ep.u - x)
        jac = (a_dense * w) @ a_dense.T
        try:
            dy = np.linalg.solve(jac, -h)
        except np.linalg.LinAlgError:
            dy, *_ = np.linalg.lstsq(jac, -h, rcond=None)
        t = 1.0
        while t > 1e-14:
            if np.linalg.norm(dual_gradient(ep, y + t * dy)) < hn:
                break
            t /= 2.0
        y = y + t * dy
    return y


def newton_solve(ep: EntropicProblem, tol=1e-13, max_iter=100):
    """Independent dense Newton solve of the optimality condition from zero."""
    return refine_dual(ep, np.zeros(ep.m), tol=tol, max_iter=max_iter)


def _loss_at_optimum(ep, seed_x, seed_y, y_warm):
    cfg = SolverConfig(theta=ep.theta, epsilon=FORWARD_EPS, y0=y_warm,
                       max_iter=5_000_000)
    sol = solve(ep, cfg)
    if sol.status is not Status.CONVERGED:
        raise ContractViolation("finite-difference re-solve did not converge")
    y = refine_dual(ep, sol.y)
    x = primal_from_dual(ep, y)
    return float(seed_x @ x + seed_y @ y)


ALL_BLOCKS = ("c", "b", "u", "A")


def fd_gradients(ep: EntropicProblem, seed: AdjointSeed, step: float = FD_STEP,
                 blocks=ALL_BLOCKS):
    """Central-difference gradients of the seeded loss w.r.t. c, b, u, A.

    blocks selects which data blocks to perturb.  Perturbing b or A is only
    meaningful when the feasible set has nonempty interior; instances whose
    equality system pins a variable to its bound become infeasible under
    one-sided perturbations and the loss is undefined there.
    """
    seed_x, seed_y = seed.resolved(ep.n, ep.m)
    base_y = refine_dual(ep, newton_solve(ep))
    a_dense = ep.a.to_dense()

    def rebuilt(a=None, b=None, c=None, u=None):
        std = StandardProblem(
            a=ep.a if a is None else _same_kind(ep.a, a),
            b=ep.b if b is None else b,
            u=ep.u if u is None else u,
        )
        return EntropicProblem(std, ep.c if c is None else c, ep.theta)

    def central(make):
        lo = _loss_at_optimum(make(-step), seed_x, seed_y, base_y)
        hi = _loss_at_optimum(make(+step), seed_x, seed_y, base_y)
        return (hi - lo) / (2.0 * step)

    out = {}
    if "c" in blocks:
        dc = np.zeros(ep.n)
        for j in range(ep.n):
            def bump(s, j=j):
                c = ep.c.copy()
                c[j] += s
                return rebuilt(c=c)
            dc[j] = central(bump)
        out["c"] = dc

    if "b" in blocks:
        db = np.zeros(ep.m)
        for i in range(ep.m):
            def bump(s, i=i):
                b = ep.b.copy()
                b[i] += s
                return rebuilt(b=b)
            db[i] = central(bump)
        out["b"] = db

    if "u" in blocks:
        du = np.zeros(ep.n)
        for j in range(ep.n):
            def bump(s, j=j):
                u = ep.u.copy()
                u[j] += s
                return rebuilt(u=u)
            du[j] = central(bump)
        out["u"] = du

    if "A" in blocks:
        da = np.zeros((ep.m, ep.n))
        for i in range(ep.m):
            for j in range(ep.n):
                def bump(s, i=i, j=j):
                    a = a_dense.copy()
                    a[i, j] += s
                    return rebuilt(a=a)
                da[i, j] = central(bump)
        out["A"] = da

    return out


def _same_kind(op, dense_entries):
    # FD perturbs single entries; re-wrap in the operator's own class.
    from .operators import BlockDiagOperator, CsrMatrix, DenseMatrix

    if isinstance(op, DenseMatrix):
        return DenseMatrix(dense_entries)
    if isinstance(op, (CsrMatrix, BlockDiagOperator)):
        return CsrMatrix.from_dense(dense_entries)
    raise ContractViolation(f"cannot rebuild operator type {type(op).__name__}")


def max_rel_error(analytic, fd, floor: float = 1e-7) -> float:
    """Worst relative disagreement, with an absolute floor for tiny entries."""
    analytic = np.asarray(analytic, dtype=np.float64)
    fd = np.asarray(fd, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), floor)
    diff = np.abs(analytic - fd)
    # Entries below the floor on both sides only need absolute agreement.
    return float(np.max(diff / denom)) if diff.size else 0.0


def check_gradients(ep: EntropicProblem, seed: AdjointSeed, step: float = FD_STEP,
                    blocks=ALL_BLOCKS):
    """Run the full comparison; returns per-block max relative errors."""
    y = newton_solve(ep)
    from .solver import Solution

    sol = Solution(
        x=primal_from_dual(ep, y),
        y=y,
        residual=float(np.linalg.norm(dual_gradient(ep, y))),
        iterations=0,
        backtracks=0,
        dual_value=0.0,
        status=Status.CONVERGED,
    )
    bundle: GradientBundle = backward(ep, sol, seed)
    fd = fd_gradients(ep, seed, step=step, blocks=blocks)
    analytic = {
        "c": bundle.dl_dc,
        "b": bundle.dl_db,
        "u": bundle.dl_du,
        "A": bundle.dl_da.to_dense(),
    }
    return {block: max_rel_error(analytic[block], fd[block]) for block in fd}
