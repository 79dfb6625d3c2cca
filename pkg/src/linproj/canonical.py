"""Canonicalization of general linear constraints into equality-plus-box form.

The user-facing description

    A1 x' <= b1,  A2 x' >= b2,  A3 x' = b3,  l' <= x' <= u'

is rewritten as  A x = b,  0 <= x <= u  by shifting the lower bounds to
zero and appending one bounded slack variable per inequality row.  The
slack capacities are derived from the positive/negative parts of the
inequality rows and the box; a negative capacity certifies infeasibility.

Zero-width originals (l'_j = u'_j) and zero-capacity slacks are eliminated
before solving because the entropic objective needs strictly positive
upper bounds; the ``Embedding`` records enough to undo all of this.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import CertifiedInfeasible, ContractViolation
from .operators import CsrMatrix, DenseMatrix, LinearOperator

FEASIBILITY_TOL = 1e-9


def _empty_operator(cols):
    return DenseMatrix(np.zeros((0, cols)))


@dataclass(frozen=True)
class GeneralConstraints:
    """General linear constraints with finite box bounds.

    ``a1 x <= b1``, ``a2 x >= b2``, ``a3 x = b3``, ``lower <= x <= upper``.
    """

    a1: LinearOperator
    b1: np.ndarray
    a2: LinearOperator
    b2: np.ndarray
    a3: LinearOperator
    b3: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        n = len(self.lower)
        for name, op, rhs in (
            ("a1", self.a1, self.b1),
            ("a2", self.a2, self.b2),
            ("a3", self.a3, self.b3),
        ):
            if op.cols != n:
                raise ContractViolation(f"{name} has {op.cols} columns, expected {n}")
            if op.rows != len(rhs):
                raise ContractViolation(f"{name}/rhs row mismatch")
            if not np.all(np.isfinite(rhs)):
                raise ContractViolation(f"right-hand side of {name} must be finite")
        if len(self.upper) != n:
            raise ContractViolation("lower/upper length mismatch")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ContractViolation("box bounds must be finite")
        if np.any(self.lower > self.upper):
            raise ContractViolation("lower bound exceeds upper bound")

    @property
    def n_vars(self):
        return len(self.lower)

    @classmethod
    def build(cls, a1=None, b1=None, a2=None, b2=None, a3=None, b3=None,
              lower=None, upper=None):
        """Convenience constructor: missing constraint groups become empty."""
        lower = np.asarray(lower, dtype=np.float64)
        upper = np.asarray(upper, dtype=np.float64)
        n = len(lower)

        def wrap(a, b):
            if a is None:
                return _empty_operator(n), np.zeros(0)
            if not isinstance(a, LinearOperator):
                a = DenseMatrix(np.atleast_2d(np.asarray(a, dtype=np.float64)))
            return a, np.atleast_1d(np.asarray(b, dtype=np.float64))

        a1, b1 = wrap(a1, b1)
        a2, b2 = wrap(a2, b2)
        a3, b3 = wrap(a3, b3)
        return cls(a1, b1, a2, b2, a3, b3, lower, upper)

    def is_sparse(self):
        return any(
            not isinstance(op, DenseMatrix) and op.rows > 0
            for op in (self.a1, self.a2, self.a3)
        )

    def row_operator(self):
        """All constraint rows stacked (a1; a2; a3) as one scipy matrix."""
        return sp.vstack(
            [self.a1.to_scipy(), self.a2.to_scipy(), self.a3.to_scipy()],
            format="csr",
        )

    def violation(self, x):
        """Max constraint violation of ``x`` against every row and the box."""
        x = np.asarray(x, dtype=np.float64)
        v = 0.0
        if self.a1.rows:
            v = max(v, float(np.max(self.a1.matvec(x) - self.b1, initial=0.0)))
        if self.a2.rows:
            v = max(v, float(np.max(self.b2 - self.a2.matvec(x), initial=0.0)))
        if self.a3.rows:
            v = max(v, float(np.max(np.abs(self.a3.matvec(x) - self.b3), initial=0.0)))
        v = max(v, float(np.max(self.lower - x, initial=0.0)))
        v = max(v, float(np.max(x - self.upper, initial=0.0)))
        return v


@dataclass(frozen=True)
class Embedding:
    """Mapping between original variables and the canonical variable vector."""

    n_original: int
    shift: np.ndarray
    kept_indices: np.ndarray
    fixed_values: dict = field(default_factory=dict)
    n_slack: int = 0

    @property
    def n_kept(self):
        return len(self.kept_indices)


@dataclass(frozen=True)
class StandardProblem:
    """Canonical problem data: ``a x = b`` with ``0 <= x <= u`` (u > 0)."""

    a: LinearOperator
    b: np.ndarray
    u: np.ndarray
    embedding: Embedding | None = None

    def __post_init__(self):
        if self.a.rows != len(self.b):
            raise ContractViolation("operator/rhs row mismatch")
        if self.a.cols != len(self.u):
            raise ContractViolation("operator/bound column mismatch")
        if np.any(np.asarray(self.u) <= 0):
            raise ContractViolation("canonical upper bounds must be strictly positive")

    @property
    def m(self):
        return self.a.rows

    @property
    def n(self):
        return self.a.cols


def canonicalize(gc: GeneralConstraints, c_prime, feasibility_tol=FEASIBILITY_TOL):
    """Transform ``gc`` into a StandardProblem plus the padded cost vector.

    Returns ``(StandardProblem, c)`` where ``c`` is ``c_prime`` restricted to
    the kept (non-fixed) originals and padded with zeros for the slacks.
    Raises CertifiedInfeasible when a slack capacity is negative beyond
    ``feasibility_tol``.
    """
    c_prime = np.asarray(c_prime, dtype=np.float64)
    n_orig = gc.n_vars
    if len(c_prime) != n_orig:
        raise ContractViolation("cost vector length mismatch")
    lower, upper = gc.lower, gc.upper
    width = upper - lower
    span = upper + lower

    # Shift lower bounds to zero; fixed variables then sit identically at 0.
    b1s = gc.b1 - gc.a1.matvec(lower) if gc.a1.rows else np.zeros(0)
    b2s = gc.b2 - gc.a2.matvec(lower) if gc.a2.rows else np.zeros(0)
    b3s = gc.b3 - gc.a3.matvec(lower) if gc.a3.rows else np.zeros(0)

    # Slack capacities from the positive/negative row parts:
    #   A+ l + A- u = (A(l+u) + |A|(l-u)) / 2
    #   A+ u + A- l = (A(l+u) + |A|(u-l)) / 2
    if gc.a1.rows:
        s1 = gc.b1 - 0.5 * (gc.a1.matvec(span) - gc.a1.abs_matvec(width))
    else:
        s1 = np.zeros(0)
    if gc.a2.rows:
        s2 = 0.5 * (gc.a2.matvec(span) + gc.a2.abs_matvec(width)) - gc.b2
    else:
        s2 = np.zeros(0)
    for name, s in (("<=", s1), (">=", s2)):
        if len(s) and np.min(s) < -feasibility_tol:
            i = int(np.argmin(s))
            raise CertifiedInfeasible(
                f"{name} row {i} can never hold under the box bounds "
                f"(slack capacity {s[i]:.3e})"
            )
    s1 = np.maximum(s1, 0.0)
    s2 = np.maximum(s2, 0.0)

    kept = np.flatnonzero(width > 0)
    fixed = {int(j): float(lower[j]) for j in np.flatnonzero(width == 0)}
    keep_s1 = np.flatnonzero(s1 > 0)
    keep_s2 = np.flatnonzero(s2 > 0)

    rows = gc.row_operator()[:, kept] if len(kept) else sp.csr_matrix(
        (gc.a1.rows + gc.a2.rows + gc.a3.rows, 0)
    )
    m1, m2 = gc.a1.rows, gc.a2.rows
    m = rows.shape[0]
    slack1 = sp.csr_matrix(
        (np.ones(len(keep_s1)), (keep_s1, np.arange(len(keep_s1)))),
        shape=(m, len(keep_s1)),
    )
    slack2 = sp.csr_matrix(
        (-np.ones(len(keep_s2)), (m1 + keep_s2, np.arange(len(keep_s2)))),
        shape=(m, len(keep_s2)),
    )
    a_full = sp.hstack([rows, slack1, slack2], format="csr")
    a_full.sort_indices()

    if gc.is_sparse():
        a_op = CsrMatrix.from_scipy(a_full)
    else:
        a_op = DenseMatrix(a_full.toarray())

    b = np.concatenate([b1s, b2s, b3s])
    u = np.concatenate([width[kept], s1[keep_s1], s2[keep_s2]])
    c = np.concatenate([c_prime[kept], np.zeros(len(keep_s1) + len(keep_s2))])
    emb = Embedding(
        n_original=n_orig,
        shift=lower.copy(),
        kept_indices=kept,
        fixed_values=fixed,
        n_slack=len(keep_s1) + len(keep_s2),
    )
    return StandardProblem(a_op, b, u, emb), c


def recover(x_std, emb: Embedding):
    """Map a canonical solution back to the original variables."""
    x_std = np.asarray(x_std, dtype=np.float64)
    if len(x_std) != emb.n_kept + emb.n_slack:
        raise ContractViolation("canonical vector length mismatch")
    out = np.empty(emb.n_original)
    out[emb.kept_indices] = x_std[: emb.n_kept] + emb.shift[emb.kept_indices]
    for j, val in emb.fixed_values.items():
        out[j] = val
    return out


def lift_cost(c_prime, emb: Embedding):
    """Pad an original-space cost vector into canonical space."""
    c_prime = np.asarray(c_prime, dtype=np.float64)
    if len(c_prime) != emb.n_original:
        raise ContractViolation("cost vector length mismatch")
    return np.concatenate([c_prime[emb.kept_indices], np.zeros(emb.n_slack)])


def lift_seed(seed_prime, emb: Embedding):
    """Pad an original-space adjoint seed into canonical space (zero slacks)."""
    return lift_cost(seed_prime, emb)


def project_gradient(dl_dc_std, emb: Embedding):
    """Drop slack entries and scatter kept gradients back to original order."""
    out = np.zeros(emb.n_original)
    out[emb.kept_indices] = np.asarray(dl_dc_std)[: emb.n_kept]
    return out
