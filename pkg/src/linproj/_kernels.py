"""JIT-compiled inner loops for the accelerated dual solver.

The dense and CSR operator realizations get a fused kernel (the loop runs
hundreds of thousands of lightweight iterations at tight tolerances, where
interpreter overhead dominates); composite operators fall back to the
numpy loop in solver.py.  Both implementations follow the identical update
sequence so either path can serve as a reference for the other.

All reductions run in index-ascending order, so results are reproducible
bit-for-bit between runs.
"""
from __future__ import annotations

import numpy as np
from numba import njit

STATUS_CONVERGED = 0
STATUS_ITER_LIMIT = 1
STATUS_STALLED = 2

_EPS_MACHINE = float(np.finfo(np.float64).eps)


@njit(cache=True)
def _matvec(sparse, dense_a, indptr, indices, data, m, w_in, out):
    if sparse:
        for i in range(m):
            acc = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                acc += data[k] * w_in[indices[k]]
            out[i] = acc
    else:
        for i in range(m):
            acc = 0.0
            row = dense_a[i]
            for j in range(row.shape[0]):
                acc += row[j] * w_in[j]
            out[i] = acc


@njit(cache=True)
def _rmatvec(sparse, dense_a, indptr, indices, data, m, n, w_in, out):
    for j in range(n):
        out[j] = 0.0
    if sparse:
        for i in range(m):
            wi = w_in[i]
            for k in range(indptr[i], indptr[i + 1]):
                out[indices[k]] += data[k] * wi
    else:
        for i in range(m):
            wi = w_in[i]
            row = dense_a[i]
            for j in range(n):
                out[j] += row[j] * wi


@njit(cache=True)
def _log1pexp(z):
    # log(1 + exp(z)) without overflow; equals logaddexp(0, z).
    if z > 0.0:
        return z + np.log1p(np.exp(-z))
    return np.log1p(np.exp(z))


@njit(cache=True)
def _sigmoid(z):
    if z >= 0.0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


@njit(cache=True)
def solve_kernel(
    sparse,
    dense_a,
    indptr,
    indices,
    data,
    b,
    c,
    u,
    theta,
    eps,
    l0,
    y0,
    delta_fixed,
    adaptive_delta,
    max_iter,
    max_backtracks,
    log_buf,
    want_log,
):
    """Accelerated dual loop; returns (x, y, res, iters, backtracks, status, n_log)."""
    m = b.shape[0]
    n = u.shape[0]

    m_est = l0
    m_floor = 1e-12 * l0
    m_ceiling = l0 / _EPS_MACHINE

    eta = y0.copy()
    zeta = y0.copy()
    lam = np.empty(m)
    grad = np.empty(m)
    zeta_new = np.empty(m)
    eta_new = np.empty(m)
    at = np.empty(n)  # scratch for A^T products
    x_lam = np.empty(n)
    x_hat = np.empty(n)
    r_hat = np.empty(m)

    # x_hat = u * sigmoid(theta*u*(c + A^T y0)); also the dual value at y0.
    _rmatvec(sparse, dense_a, indptr, indices, data, m, n, eta, at)
    val_eta = 0.0
    for j in range(n):
        z = theta * u[j] * (c[j] + at[j])
        x_hat[j] = u[j] * _sigmoid(z)
        val_eta += _log1pexp(z)
    val_eta = val_eta / theta
    for i in range(m):
        val_eta -= b[i] * eta[i]

    _matvec(sparse, dense_a, indptr, indices, data, m, x_hat, r_hat)
    res_sq = 0.0
    for i in range(m):
        r_hat[i] -= b[i]
        res_sq += r_hat[i] * r_hat[i]
    res = np.sqrt(res_sq)

    beta = 0.0
    flag_f = False
    k = 0
    backtracks = 0
    consecutive_rejects = 0
    n_log = 0
    if want_log:
        log_buf[n_log, 0] = 0.0
        log_buf[n_log, 1] = m_est
        log_buf[n_log, 2] = res
        log_buf[n_log, 3] = val_eta
        log_buf[n_log, 4] = np.nan
        log_buf[n_log, 5] = np.nan
        n_log += 1

    status = STATUS_CONVERGED
    while res > eps:
        if k >= max_iter:
            status = STATUS_ITER_LIMIT
            break
        alpha_new = (1.0 + np.sqrt(1.0 + 4.0 * m_est * beta)) / (2.0 * m_est)
        beta_new = beta + alpha_new
        tau = alpha_new / beta_new
        for i in range(m):
            lam[i] = eta[i] + tau * (zeta[i] - eta[i])

        _rmatvec(sparse, dense_a, indptr, indices, data, m, n, lam, at)
        val_lam = 0.0
        for j in range(n):
            z = theta * u[j] * (c[j] + at[j])
            x_lam[j] = u[j] * _sigmoid(z)
            val_lam += _log1pexp(z)
        val_lam = val_lam / theta
        for i in range(m):
            val_lam -= b[i] * lam[i]

        _matvec(sparse, dense_a, indptr, indices, data, m, x_lam, grad)
        grad_sq = 0.0
        for i in range(m):
            grad[i] -= b[i]
            grad_sq += grad[i] * grad[i]

        for i in range(m):
            zeta_new[i] = zeta[i] - alpha_new * grad[i]
            eta_new[i] = eta[i] + tau * (zeta_new[i] - eta[i])

        _rmatvec(sparse, dense_a, indptr, indices, data, m, n, eta_new, at)
        val_eta = 0.0
        for j in range(n):
            val_eta += _log1pexp(theta * u[j] * (c[j] + at[j]))
        val_eta = val_eta / theta
        for i in range(m):
            val_eta -= b[i] * eta_new[i]

        delta = delta_fixed
        if adaptive_delta:
            delta = 10.0 * _EPS_MACHINE * (1.0 + abs(val_lam))

        if val_eta - val_lam - delta <= -grad_sq / (2.0 * m_est):
            m_used = m_est
            if flag_f:
                m_est = m_est / 2.0
                if m_est < m_floor:
                    m_est = m_floor
            res_sq = 0.0
            for j in range(n):
                x_hat[j] += tau * (x_lam[j] - x_hat[j])
            for i in range(m):
                r_hat[i] = (1.0 - tau) * r_hat[i] + tau * grad[i]
                res_sq += r_hat[i] * r_hat[i]
            for i in range(m):
                eta[i] = eta_new[i]
                zeta[i] = zeta_new[i]
            beta = beta_new
            flag_f = True
            consecutive_rejects = 0
            k += 1
            res = np.sqrt(res_sq)
            if res <= eps:
                # Recurrence drift must not fake a convergence certificate.
                _matvec(sparse, dense_a, indptr, indices, data, m, x_hat, r_hat)
                res_sq = 0.0
                for i in range(m):
                    r_hat[i] -= b[i]
                    res_sq += r_hat[i] * r_hat[i]
                res = np.sqrt(res_sq)
            if want_log and n_log < log_buf.shape[0]:
                log_buf[n_log, 0] = k
                log_buf[n_log, 1] = m_used
                log_buf[n_log, 2] = res
                log_buf[n_log, 3] = val_eta
                log_buf[n_log, 4] = val_lam
                log_buf[n_log, 5] = grad_sq
                n_log += 1
        else:
            m_est = 2.0 * m_est
            flag_f = False
            backtracks += 1
            consecutive_rejects += 1
            if m_est > m_ceiling or consecutive_rejects > max_backtracks:
                status = STATUS_STALLED
                break

    if status == STATUS_CONVERGED and res > eps:
        status = STATUS_ITER_LIMIT
    return x_hat, eta, res, k, backtracks, status, n_log
