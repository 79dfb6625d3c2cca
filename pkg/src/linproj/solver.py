"""Adaptive primal-dual accelerated gradient descent on the smooth dual.

The loop maintains three dual sequences (eta, zeta, lambda), a primal
running average x_hat that is always a convex combination of interior
points, and an adaptive curvature estimate M.  Each trial step is accepted
when the dual objective decreases by at least the local quadratic model,
relaxed by a small delta to survive floating-point round-off.  On
acceptance M is halved only after two consecutive successes; on rejection
it doubles.  Termination is on the Euclidean equality residual of x_hat.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dual import EntropicProblem, dual_objective, sigmoid
from .errors import ContractViolation
from .operators import CsrMatrix, DenseMatrix, block_diag

try:
    from . import _kernels
except ImportError:  # pragma: no cover - numba is an optional accelerator
    _kernels = None

_EPS_MACHINE = float(np.finfo(np.float64).eps)


class Status(enum.Enum):
    CONVERGED = "converged"
    ITER_LIMIT = "iter_limit"
    STALLED = "stalled"


@dataclass(frozen=True)
class SolverConfig:
    """Forward-solve parameters.

    ``l0`` defaults to theta and ``y0`` to the zero vector when left None.
    ``delta`` relaxes the acceptance test; None selects the adaptive policy
    10 * eps_machine * (1 + |dual value|).
    """

    theta: float = 1.0
    epsilon: float = 1e-6
    l0: float | None = None
    y0: np.ndarray | None = None
    delta: float | None = None
    max_iter: int = 100_000
    max_backtracks_per_iter: int = 60

    def __post_init__(self):
        if self.theta <= 0 or self.epsilon <= 0:
            raise ContractViolation("theta and epsilon must be positive")
        if self.l0 is not None and self.l0 <= 0:
            raise ContractViolation("l0 must be positive")
        if self.delta is not None and self.delta < 0:
            raise ContractViolation("delta must be non-negative")
        if self.max_iter < 1:
            raise ContractViolation("max_iter must be at least 1")


@dataclass(frozen=True)
class StepRecord:
    """One accepted step.

    ``dual_value`` is the objective at the accepted point and
    ``trial_value`` the objective at the trial point whose gradient drove
    the step, so the acceptance inequality can be re-verified from the log
    alone.  Both trial fields are NaN on the initial record.
    """

    iteration: int
    m_estimate: float
    residual: float
    dual_value: float
    trial_value: float = float("nan")
    gradient_sq: float = float("nan")


@dataclass(frozen=True)
class Solution:
    x: np.ndarray
    y: np.ndarray
    residual: float
    iterations: int
    backtracks: int
    dual_value: float
    status: Status
    steps: tuple = field(default=(), repr=False)

    @property
    def converged(self):
        return self.status is Status.CONVERGED


def residual(ep: EntropicProblem, x) -> float:
    """Euclidean equality residual ||A x - b||_2."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ep.n,):
        raise ContractViolation("primal vector length mismatch")
    return float(np.linalg.norm(ep.a.matvec(x) - ep.b))


def _delta_for(cfg: SolverConfig, ref_value: float) -> float:
    if cfg.delta is not None:
        return cfg.delta
    return 10.0 * _EPS_MACHINE * (1.0 + abs(ref_value))


def _solve_compiled(ep, cfg, theta, eps, l0, y0, log_steps) -> Solution:
    """Dispatch dense and CSR instances to the fused JIT kernel."""
    a = ep.a
    if isinstance(a, DenseMatrix):
        sparse = False
        dense_a = np.ascontiguousarray(a.entries)
        indptr = np.zeros(1, dtype=np.int64)
        indices = np.zeros(0, dtype=np.int64)
        data = np.zeros(0, dtype=np.float64)
    else:
        sparse = True
        csr = a.to_scipy()
        dense_a = np.zeros((1, 1), dtype=np.float64)
        indptr = np.asarray(csr.indptr, dtype=np.int64)
        indices = np.asarray(csr.indices, dtype=np.int64)
        data = np.asarray(csr.data, dtype=np.float64)

    log_buf = np.zeros((cfg.max_iter + 1 if log_steps else 0, 6), dtype=np.float64)
    x, y, res, k, backtracks, code, n_log = _kernels.solve_kernel(
        sparse,
        dense_a,
        indptr,
        indices,
        data,
        np.ascontiguousarray(ep.b),
        np.ascontiguousarray(ep.c),
        np.ascontiguousarray(ep.u),
        theta,
        eps,
        l0,
        np.ascontiguousarray(y0),
        -1.0 if cfg.delta is None else cfg.delta,
        cfg.delta is None,
        cfg.max_iter,
        cfg.max_backtracks_per_iter,
        log_buf,
        log_steps,
    )
    status = {
        _kernels.STATUS_CONVERGED: Status.CONVERGED,
        _kernels.STATUS_ITER_LIMIT: Status.ITER_LIMIT,
        _kernels.STATUS_STALLED: Status.STALLED,
    }[code]
    steps = tuple(
        StepRecord(int(row[0]), float(row[1]), float(row[2]), float(row[3]),
                   float(row[4]), float(row[5]))
        for row in log_buf[:n_log]
    )
    return Solution(
        x=x,
        y=y,
        residual=float(res),
        iterations=int(k),
        backtracks=int(backtracks),
        dual_value=dual_objective(ep, y),
        status=status,
        steps=steps,
    )


def solve(ep: EntropicProblem, cfg: SolverConfig, log_steps: bool = False) -> Solution:
    """Run the accelerated dual loop until ||A x_hat - b||_2 <= epsilon."""
    if cfg.theta != ep.theta:
        raise ContractViolation(
            "config theta and problem theta disagree "
            f"({cfg.theta} vs {ep.theta})"
        )
    theta, eps = ep.theta, cfg.epsilon
    l0 = cfg.l0 if cfg.l0 is not None else theta
    y0 = np.zeros(ep.m) if cfg.y0 is None else np.asarray(cfg.y0, dtype=np.float64)
    if y0.shape != (ep.m,):
        raise ContractViolation("y0 length mismatch")

    if _kernels is not None and isinstance(ep.a, (DenseMatrix, CsrMatrix)):
        return _solve_compiled(ep, cfg, theta, eps, l0, y0, log_steps)

    a, b, c, u = ep.a, ep.b, ep.c, ep.u
    tu = theta * u
    m_est = l0
    m_floor = 1e-12 * l0           # guard against division blow-up in alpha
    m_ceiling = l0 / _EPS_MACHINE  # beyond this the decrease test cannot pass
    eta = y0.copy()
    zeta = y0.copy()

    def neg_g(y):
        # Dual value at y, reusing the logits for the sigmoid map.
        z = tu * (c + a.rmatvec(y))
        return float(np.sum(np.logaddexp(0.0, z)) / theta - b @ y), z

    val_eta, z0 = neg_g(eta)
    x_hat = u * sigmoid(z0)
    beta = 0.0
    flag_f = False

    # The equality residual of x_hat obeys the recurrence
    # r_new = (1 - tau) r + tau (A x(lambda) - b); recompute it exactly
    # before declaring convergence so drift cannot fake a certificate.
    r_hat = a.matvec(x_hat) - b
    res = float(np.linalg.norm(r_hat))
    k = 0
    backtracks = 0
    consecutive_rejects = 0
    steps = []
    if log_steps:
        steps.append(StepRecord(0, m_est, res, val_eta))

    status = Status.CONVERGED
    while res > eps:
        if k >= cfg.max_iter:
            status = Status.ITER_LIMIT
            break
        alpha_new = (1.0 + math.sqrt(1.0 + 4.0 * m_est * beta)) / (2.0 * m_est)
        beta_new = beta + alpha_new
        tau = alpha_new / beta_new
        lam = eta + tau * (zeta - eta)
        z_lam = tu * (c + a.rmatvec(lam))
        x_lam = u * sigmoid(z_lam)
        grad = a.matvec(x_lam) - b
        grad_sq = float(grad @ grad)
        zeta_new = zeta - alpha_new * grad
        eta_new = eta + tau * (zeta_new - eta)

        val_lam = float(np.sum(np.logaddexp(0.0, z_lam)) / theta - b @ lam)
        val_eta, _ = neg_g(eta_new)
        delta = _delta_for(cfg, val_lam)
        if val_eta - val_lam - delta <= -grad_sq / (2.0 * m_est):
            m_used = m_est
            if flag_f:
                m_est = max(m_est / 2.0, m_floor)
            x_hat = x_hat + tau * (x_lam - x_hat)
            r_hat = (1.0 - tau) * r_hat + tau * grad
            eta, zeta, beta = eta_new, zeta_new, beta_new
            flag_f = True
            consecutive_rejects = 0
            k += 1
            res = float(np.linalg.norm(r_hat))
            if res <= eps:
                r_hat = a.matvec(x_hat) - b
                res = float(np.linalg.norm(r_hat))
            if log_steps:
                steps.append(StepRecord(k, m_used, res, val_eta, val_lam, grad_sq))
        else:
            m_est = 2.0 * m_est
            flag_f = False
            backtracks += 1
            consecutive_rejects += 1
            if m_est > m_ceiling or consecutive_rejects > cfg.max_backtracks_per_iter:
                status = Status.STALLED
                break

    if status is Status.CONVERGED and res > eps:
        status = Status.ITER_LIMIT
    return Solution(
        x=x_hat,
        y=eta,
        residual=res,
        iterations=k,
        backtracks=backtracks,
        dual_value=dual_objective(ep, eta),
        status=status,
        steps=tuple(steps),
    )


def solve_batch(eps_list, cfg: SolverConfig, mode: str = "independent"):
    """Solve several instances.

    ``independent`` solves each instance with its own termination test.
    ``block-diagonal`` stacks the operators into one block-diagonal system,
    solves once, and splits; termination is then on the joint residual.
    """
    eps_list = list(eps_list)
    if not eps_list:
        raise ContractViolation("solve_batch requires at least one instance")
    if mode == "independent":
        return [solve(ep, cfg) for ep in eps_list]
    if mode != "block-diagonal":
        raise ContractViolation(f"unknown batch mode {mode!r}")

    if any(ep.theta != eps_list[0].theta for ep in eps_list):
        raise ContractViolation("block-diagonal mode requires a shared theta")
    from .canonical import StandardProblem

    stacked = StandardProblem(
        a=block_diag([ep.a for ep in eps_list]),
        b=np.concatenate([ep.b for ep in eps_list]),
        u=np.concatenate([ep.u for ep in eps_list]),
    )
    joint = EntropicProblem(stacked, np.concatenate([ep.c for ep in eps_list]),
                            eps_list[0].theta)
    y0 = None
    if cfg.y0 is not None:
        y0 = np.concatenate([np.asarray(y, dtype=np.float64) for y in cfg.y0])
    sol = solve(joint, replace(cfg, y0=y0))

    out = []
    row, col = 0, 0
    for ep in eps_list:
        xs = sol.x[col : col + ep.n]
        ys = sol.y[row : row + ep.m]
        out.append(
            Solution(
                x=xs,
                y=ys,
                residual=residual(ep, xs),
                iterations=sol.iterations,
                backtracks=sol.backtracks,
                dual_value=dual_objective(ep, ys),
                status=sol.status,
            )
        )
        row += ep.m
        col += ep.n
    return out
