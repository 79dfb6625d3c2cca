"""Shared utilities for the test suite.

Random well-posed instances, a feasibility margin for original constraints,
and a torch-unrolled differentiable replica of the forward solver used as
an independent gradient oracle.
"""
from __future__ import annotations

import numpy as np

from linproj import DenseMatrix, EntropicProblem, StandardProblem


def random_standard(rng, m=None, n=None, theta=1.0, cost_scale=1.0):
    """A random feasible standard-form instance with full-row-rank A.

    Rows are normalized so the residual scale is comparable across draws,
    and b is chosen as the image of an interior point so the instance is
    always strictly feasible.
    """
    if m is None:
        m = int(rng.integers(1, 5))
    if n is None:
        n = int(rng.integers(m + 2, 11))
    while True:
        a = rng.normal(size=(m, n))
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        if np.linalg.matrix_rank(a) == m:
            break
    u = rng.uniform(0.5, 1.5, n)
    x0 = u * rng.uniform(0.2, 0.8, n)
    b = a @ x0
    c = cost_scale * rng.uniform(-1.0, 1.0, n)
    std = StandardProblem(a=DenseMatrix(a), b=b, u=u)
    return EntropicProblem(std, c, theta)


def feasibility_margin(gc):
    """kappa = 1 + max row norm of the stacked constraint rows."""
    rows = gc.row_operator()
    if rows.shape[0] == 0:
        return 1.0
    norms = np.sqrt(np.asarray(rows.multiply(rows).sum(axis=1)).ravel())
    return 1.0 + float(norms.max())


def unrolled_gradients(a, b, c, u, theta, seed_x, epsilon=1e-10, max_iter=200_000):
    """Gradients of seed_x . x(eta) obtained by autodiff through a fully
    unrolled run of the accelerated dual loop (torch, float64).

    The adaptive curvature estimate and acceptance decisions use detached
    scalars; the dual iterates keep the full autograd graph, so
    differentiating the final loss replays the entire solve trace.
    """
    import torch

    a_t = torch.tensor(np.asarray(a, dtype=np.float64), requires_grad=True)
    b_t = torch.tensor(np.asarray(b, dtype=np.float64), requires_grad=True)
    c_t = torch.tensor(np.asarray(c, dtype=np.float64), requires_grad=True)
    u_t = torch.tensor(np.asarray(u, dtype=np.float64), requires_grad=True)
    seed_t = torch.tensor(np.asarray(seed_x, dtype=np.float64))
    m = b_t.shape[0]

    def neg_g(y):
        z = theta * u_t * (c_t + a_t.T @ y)
        return torch.sum(torch.nn.functional.softplus(z)) / theta - b_t @ y

    def x_of(y):
        z = theta * u_t * (c_t + a_t.T @ y)
        return u_t * torch.sigmoid(z)

    eps_machine = float(np.finfo(np.float64).eps)
    m_est = theta
    eta = torch.zeros(m, dtype=torch.float64)
    zeta = torch.zeros(m, dtype=torch.float64)
    beta = 0.0
    flag_f = False
    for _ in range(max_iter):
        # Terminate on the dual iterate's own residual; the closed-form map
        # below turns the converged eta into the primal the loss reads, so
        # the autodiff trace ends at a point where the optimality condition
        # holds to machine-level accuracy.
        res = float(torch.linalg.norm(a_t @ x_of(eta) - b_t).item())
        if res <= epsilon:
            break
        alpha = (1.0 + np.sqrt(1.0 + 4.0 * m_est * beta)) / (2.0 * m_est)
        beta_new = beta + alpha
        tau = alpha / beta_new
        lam = eta + tau * (zeta - eta)
        x_lam = x_of(lam)
        grad = a_t @ x_lam - b_t
        grad_sq = float((grad @ grad).item())
        zeta_new = zeta - alpha * grad
        eta_new = eta + tau * (zeta_new - eta)
        val_lam = float(neg_g(lam).item())
        val_eta = float(neg_g(eta_new).item())
        delta = 10.0 * eps_machine * (1.0 + abs(val_lam))
        if val_eta - val_lam - delta <= -grad_sq / (2.0 * m_est):
            if flag_f:
                m_est /= 2.0
            eta, zeta, beta = eta_new, zeta_new, beta_new
            flag_f = True
        else:
            m_est *= 2.0
            flag_f = False
    else:
        raise RuntimeError("unrolled oracle did not converge")

    loss = seed_t @ x_of(eta)
    loss.backward()
    return {
        "A": a_t.grad.detach().numpy(),
        "b": b_t.grad.detach().numpy(),
        "c": c_t.grad.detach().numpy(),
        "u": u_t.grad.detach().numpy(),
    }
