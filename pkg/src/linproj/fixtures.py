"""Constraint-family generators used as test corpora and benchmark inputs.

Four families: tour matrices with fixed start/end cities (optionally with a
priority city), partial matchings with a fixed inlier count, portfolio
simplexes with a preferred-asset floor, and unit-commitment schedules with
logical plus minimum up/down-time rows.  The last family contains
mixed-sign coefficients, which positive-linear layers cannot express.

All indices are 0-based.  Generators emit only constraint structure; costs
are the caller's business.
"""
from __future__ import annotations

import numpy as np

from .canonical import GeneralConstraints
from .errors import ContractViolation
from .operators import CsrMatrix, DenseMatrix

FAMILIES = (
    "tsp_start_end",
    "tsp_priority",
    "partial_matching",
    "portfolio",
    "uc_min_updown",
)


def _finish(gc: GeneralConstraints, sparse: bool) -> GeneralConstraints:
    if not sparse:
        return gc
    return GeneralConstraints(
        a1=CsrMatrix.from_dense(gc.a1.to_dense()),
        b1=gc.b1,
        a2=CsrMatrix.from_dense(gc.a2.to_dense()),
        b2=gc.b2,
        a3=CsrMatrix.from_dense(gc.a3.to_dense()),
        b3=gc.b3,
        lower=gc.lower,
        upper=gc.upper,
    )


def gen_tsp_start_end(n: int, s: int, e: int, sparse: bool = False) -> GeneralConstraints:
    """Doubly-stochastic n-by-n tour matrix with X[s,0] = X[e,n-1] = 1.

    Variables are the row-major entries of X; X[i,k] = 1 means city i is
    visited at step k.
    """
    if n < 2:
        raise ContractViolation("need at least two cities")
    if not (0 <= s < n and 0 <= e < n) or s == e:
        raise ContractViolation("start/end cities must be distinct in-range indices")
    nv = n * n
    rows = []
    rhs = []
    for k in range(n):  # column sums: one city per step
        r = np.zeros(nv)
        r[np.arange(n) * n + k] = 1.0
        rows.append(r)
        rhs.append(1.0)
    for i in range(n):  # row sums: each city visited once
        r = np.zeros(nv)
        r[i * n : (i + 1) * n] = 1.0
        rows.append(r)
        rhs.append(1.0)
    for idx in (s * n + 0, e * n + (n - 1)):  # pinned cells
        r = np.zeros(nv)
        r[idx] = 1.0
        rows.append(r)
        rhs.append(1.0)
    gc = GeneralConstraints.build(
        a3=np.array(rows), b3=np.array(rhs), lower=np.zeros(nv), upper=np.ones(nv)
    )
    return _finish(gc, sparse)


def gen_tsp_priority(
    n: int, s: int, e: int, p: int, m_steps: int, sparse: bool = False
) -> GeneralConstraints:
    """Start/end tour constraints plus one row forcing city p into the
    first m_steps + 1 visit positions."""
    if p in (s, e):
        raise ContractViolation("priority city must differ from start and end")
    if not (0 <= p < n):
        raise ContractViolation("priority city index out of range")
    if not (1 <= m_steps < n):
        raise ContractViolation("m_steps must lie in [1, n)")
    base = gen_tsp_start_end(n, s, e)
    nv = n * n
    prio = np.zeros(nv)
    prio[p * n : p * n + m_steps + 1] = 1.0
    a3 = np.vstack([base.a3.to_dense(), prio])
    b3 = np.concatenate([base.b3, [1.0]])
    gc = GeneralConstraints.build(
        a3=a3, b3=b3, lower=np.zeros(nv), upper=np.ones(nv)
    )
    return _finish(gc, sparse)


def gen_partial_matching(m: int, n: int, p: int, sparse: bool = False) -> GeneralConstraints:
    """m-by-n matching matrix with at most one match per node and exactly
    p matched pairs overall."""
    if not (1 <= p <= min(m, n)):
        raise ContractViolation("inlier count must satisfy 1 <= p <= min(m, n)")
    nv = m * n
    ineq = []
    for j in range(n):  # column sums <= 1
        r = np.zeros(nv)
        r[np.arange(m) * n + j] = 1.0
        ineq.append(r)
    for i in range(m):  # row sums <= 1
        r = np.zeros(nv)
        r[i * n : (i + 1) * n] = 1.0
        ineq.append(r)
    gc = GeneralConstraints.build(
        a1=np.array(ineq),
        b1=np.ones(m + n),
        a3=np.ones((1, nv)),
        b3=np.array([float(p)]),
        lower=np.zeros(nv),
        upper=np.ones(nv),
    )
    return _finish(gc, sparse)


def gen_portfolio(n: int, preferred, q: float, sparse: bool = False) -> GeneralConstraints:
    """Allocation simplex with a floor q on the preferred-asset mass."""
    preferred = sorted(set(int(i) for i in preferred))
    if not preferred or any(i < 0 or i >= n for i in preferred):
        raise ContractViolation("preferred set must be non-empty in-range indices")
    if q <= 0:
        raise ContractViolation("preference floor must be positive")
    # q > |S| is representable but infeasible; canonicalization certifies it.
    pref_row = np.zeros(n)
    pref_row[preferred] = 1.0
    gc = GeneralConstraints.build(
        a2=pref_row.reshape(1, -1),
        b2=np.array([float(q)]),
        a3=np.ones((1, n)),
        b3=np.array([1.0]),
        lower=np.zeros(n),
        upper=np.ones(n),
    )
    return _finish(gc, sparse)


def gen_uc_min_updown(
    g_count: int, t_count: int, ut, dt, u0, sparse: bool = False
) -> GeneralConstraints:
    """Unit-commitment logical and minimum up/down-time constraints.

    Variables per generator g and step t: on/off state u, start v, stop w,
    laid out as all u's, then all v's, then all w's (g-major, t-minor).
    Logical rows: u(t) - u(t-1) - v(t) + w(t) = 0 with the initial state
    u0 folded into the t = 0 row.  Up-time rows: sum of the last UT starts
    minus u(t) <= 0; down-time rows: sum of the last DT stops plus u(t) <= 1.
    """
    ut = np.broadcast_to(np.asarray(ut, dtype=np.int64), (g_count,))
    dt = np.broadcast_to(np.asarray(dt, dtype=np.int64), (g_count,))
    u0 = np.broadcast_to(np.asarray(u0, dtype=np.float64), (g_count,))
    if np.any((ut < 1) | (ut > t_count)) or np.any((dt < 1) | (dt > t_count)):
        raise ContractViolation("up/down times must lie in [1, t_count]")
    if np.any((u0 != 0) & (u0 != 1)):
        raise ContractViolation("initial states must be binary")

    nv = 3 * g_count * t_count
    off_u = 0
    off_v = g_count * t_count
    off_w = 2 * g_count * t_count

    def iu(g, t):
        return off_u + g * t_count + t

    def iv(g, t):
        return off_v + g * t_count + t

    def iw(g, t):
        return off_w + g * t_count + t

    eq_rows, eq_rhs = [], []
    le_rows, le_rhs = [], []
    for g in range(g_count):
        for t in range(t_count):
            r = np.zeros(nv)
            r[iu(g, t)] = 1.0
            r[iv(g, t)] = -1.0
            r[iw(g, t)] = 1.0
            if t == 0:
                eq_rhs.append(float(u0[g]))
            else:
                r[iu(g, t - 1)] = -1.0
                eq_rhs.append(0.0)
            eq_rows.append(r)
        for t in range(int(ut[g]) - 1, t_count):
            r = np.zeros(nv)
            for i in range(t - int(ut[g]) + 1, t + 1):
                r[iv(g, i)] = 1.0
            r[iu(g, t)] = -1.0
            le_rows.append(r)
            le_rhs.append(0.0)
        for t in range(int(dt[g]) - 1, t_count):
            r = np.zeros(nv)
            for i in range(t - int(dt[g]) + 1, t + 1):
                r[iw(g, i)] = 1.0
            r[iu(g, t)] = 1.0
            le_rows.append(r)
            le_rhs.append(1.0)

    gc = GeneralConstraints.build(
        a1=np.array(le_rows),
        b1=np.array(le_rhs),
        a3=np.array(eq_rows),
        b3=np.array(eq_rhs),
        lower=np.zeros(nv),
        upper=np.ones(nv),
    )
    return _finish(gc, sparse)


def generate(family: str, params: dict, sparse: bool = False) -> GeneralConstraints:
    """Dispatch by family name; parameters are family-specific keywords."""
    if family == "tsp_start_end":
        return gen_tsp_start_end(sparse=sparse, **params)
    if family == "tsp_priority":
        return gen_tsp_priority(sparse=sparse, **params)
    if family == "partial_matching":
        return gen_partial_matching(sparse=sparse, **params)
    if family == "portfolio":
        return gen_portfolio(sparse=sparse, **params)
    if family == "uc_min_updown":
        return gen_uc_min_updown(sparse=sparse, **params)
    raise ContractViolation(f"unknown fixture family {family!r}")
