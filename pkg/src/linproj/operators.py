"""Matrix-free linear operators: dense, compressed-sparse-row, block-diagonal.

Every operator exposes forward (``matvec``) and adjoint (``rmatvec``)
products plus a few structural helpers the solver and the backward pass
need (absolute-value products for slack bounds, weighted Gram traces for
Tikhonov shifts, pattern-restricted outer products for matrix gradients).
Operators are immutable after construction and never factorized.
"""
from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np
import scipy.sparse as sp

from .errors import ContractViolation


def _as_vector(v, length, name):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != length:
        raise ContractViolation(
            f"{name}: expected a vector of length {length}, got shape {v.shape}"
        )
    return v


class LinearOperator(ABC):
    """A real m-by-n linear map. Subclasses set ``rows`` and ``cols``."""

    rows: int
    cols: int

    @property
    def shape(self):
        return (self.rows, self.cols)

    def matvec(self, v):
        """Return A @ v."""
        v = _as_vector(v, self.cols, "matvec input")
        return self._matvec(v)

    def rmatvec(self, w):
        """Return A.T @ w."""
        w = _as_vector(w, self.rows, "rmatvec input")
        return self._rmatvec(w)

    def abs_matvec(self, v):
        """Return |A| @ v with |.| taken entrywise."""
        v = _as_vector(v, self.cols, "abs_matvec input")
        return self._abs_matvec(v)

    @abstractmethod
    def _matvec(self, v): ...

    @abstractmethod
    def _rmatvec(self, w): ...

    @abstractmethod
    def _abs_matvec(self, v): ...

    @abstractmethod
    def to_dense(self) -> np.ndarray:
        """Explicit densification (tests and small-instance oracles only)."""

    @abstractmethod
    def to_scipy(self) -> sp.csr_matrix:
        """CSR view of the operator (used by the canonicalizer)."""

    @abstractmethod
    def weighted_gram_trace(self, w) -> float:
        """trace(A diag(w) A^T) = sum_ij A_ij^2 w_j."""

    @abstractmethod
    def pattern_outer(self, pairs) -> "LinearOperator":
        """Sum of outer products restricted to this operator's pattern.

        ``pairs`` is a list of (left m-vector, right n-vector); the result
        holds sum_k left_k right_k^T evaluated only at stored positions
        (everywhere for dense), wrapped in the same operator class.
        """


class DenseMatrix(LinearOperator):
    """Row-major dense matrix operator."""

    def __init__(self, entries):
        a = np.ascontiguousarray(np.asarray(entries, dtype=np.float64))
        if a.ndim != 2:
            raise ContractViolation("DenseMatrix expects a 2-D array")
        if not np.all(np.isfinite(a)):
            raise ContractViolation("DenseMatrix entries must be finite")
        self.entries = a
        self.rows, self.cols = a.shape

    def _matvec(self, v):
        return self.entries @ v

    def _rmatvec(self, w):
        return self.entries.T @ w

    def _abs_matvec(self, v):
        return np.abs(self.entries) @ v

    def to_dense(self):
        return self.entries.copy()

    def to_scipy(self):
        return sp.csr_matrix(self.entries)

    def weighted_gram_trace(self, w):
        return float(np.sum((self.entries**2) @ np.asarray(w, dtype=np.float64)))

    def pattern_outer(self, pairs):
        out = np.zeros((self.rows, self.cols))
        for left, right in pairs:
            out += np.outer(left, right)
        return DenseMatrix(out)


class CsrMatrix(LinearOperator):
    """Compressed-sparse-row matrix with sorted column indices per row."""

    def __init__(self, rows, cols, row_offsets, col_indices, values):
        self.rows = int(rows)
        self.cols = int(cols)
        self.row_offsets = np.asarray(row_offsets, dtype=np.int64)
        self.col_indices = np.asarray(col_indices, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        self._validate()
        self._csr = sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.rows, self.cols),
        )

    def _validate(self):
        ro, ci, vals = self.row_offsets, self.col_indices, self.values
        if ro.shape != (self.rows + 1,) or ro[0] != 0 or ro[-1] != len(ci):
            raise ContractViolation("CsrMatrix: malformed row_offsets")
        if np.any(np.diff(ro) < 0):
            raise ContractViolation("CsrMatrix: row_offsets must be non-decreasing")
        if len(ci) != len(vals):
            raise ContractViolation("CsrMatrix: col_indices/values length mismatch")
        if len(ci) and (ci.min() < 0 or ci.max() >= self.cols):
            raise ContractViolation("CsrMatrix: column index out of range")
        for r in range(self.rows):
            row = ci[ro[r] : ro[r + 1]]
            if np.any(np.diff(row) <= 0):
                raise ContractViolation(
                    "CsrMatrix: column indices must be strictly increasing per row"
                )
        if not np.all(np.isfinite(vals)):
            raise ContractViolation("CsrMatrix: values must be finite")

    @classmethod
    def from_dense(cls, entries):
        m = sp.csr_matrix(np.asarray(entries, dtype=np.float64))
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @classmethod
    def from_scipy(cls, m):
        m = m.tocsr()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    def _matvec(self, v):
        return self._csr @ v

    def _rmatvec(self, w):
        return self._csr.T @ w

    def _abs_matvec(self, v):
        contrib = np.abs(self.values) * v[self.col_indices]
        out = np.zeros(self.rows)
        np.add.at(out, np.repeat(np.arange(self.rows), np.diff(self.row_offsets)), contrib)
        return out

    def to_dense(self):
        return self._csr.toarray()

    def to_scipy(self):
        return self._csr.copy()

    def weighted_gram_trace(self, w):
        w = np.asarray(w, dtype=np.float64)
        return float(np.sum(self.values**2 * w[self.col_indices]))

    def pattern_outer(self, pairs):
        row_of = np.repeat(np.arange(self.rows), np.diff(self.row_offsets))
        vals = np.zeros_like(self.values)
        for left, right in pairs:
            vals += np.asarray(left)[row_of] * np.asarray(right)[self.col_indices]
        return CsrMatrix(self.rows, self.cols, self.row_offsets, self.col_indices, vals)


class BlockDiagOperator(LinearOperator):
    """Lazy block-diagonal composite; blocks are never densified to solve."""

    def __init__(self, blocks):
        if not blocks:
            raise ContractViolation("BlockDiagOperator needs at least one block")
        self.blocks = list(blocks)
        self.row_starts = np.cumsum([0] + [b.rows for b in self.blocks])
        self.col_starts = np.cumsum([0] + [b.cols for b in self.blocks])
        self.rows = int(self.row_starts[-1])
        self.cols = int(self.col_starts[-1])

    def _per_block(self, v, starts):
        return [v[starts[i] : starts[i + 1]] for i in range(len(self.blocks))]

    def _matvec(self, v):
        parts = self._per_block(v, self.col_starts)
        return np.concatenate(
            [b.matvec(p) for b, p in zip(self.blocks, parts)]
        ) if self.blocks else np.zeros(0)

    def _rmatvec(self, w):
        parts = self._per_block(w, self.row_starts)
        return np.concatenate([b.rmatvec(p) for b, p in zip(self.blocks, parts)])

    def _abs_matvec(self, v):
        parts = self._per_block(v, self.col_starts)
        return np.concatenate([b.abs_matvec(p) for b, p in zip(self.blocks, parts)])

    def to_dense(self):
        out = np.zeros((self.rows, self.cols))
        for i, b in enumerate(self.blocks):
            out[
                self.row_starts[i] : self.row_starts[i + 1],
                self.col_starts[i] : self.col_starts[i + 1],
            ] = b.to_dense()
        return out

    def to_scipy(self):
        return sp.block_diag([b.to_scipy() for b in self.blocks], format="csr")

    def weighted_gram_trace(self, w):
        parts = self._per_block(np.asarray(w, dtype=np.float64), self.col_starts)
        return float(sum(b.weighted_gram_trace(p) for b, p in zip(self.blocks, parts)))

    def pattern_outer(self, pairs):
        sub = []
        for i, b in enumerate(self.blocks):
            block_pairs = [
                (
                    np.asarray(left)[self.row_starts[i] : self.row_starts[i + 1]],
                    np.asarray(right)[self.col_starts[i] : self.col_starts[i + 1]],
                )
                for left, right in pairs
            ]
            sub.append(b.pattern_outer(block_pairs))
        return BlockDiagOperator(sub)


def block_diag(ops) -> LinearOperator:
    """Stack operators along the diagonal into one composite."""
    ops = list(ops)
    if not ops:
        raise ContractViolation("block_diag requires a non-empty list")
    return BlockDiagOperator(ops)


def identity(n) -> DenseMatrix:
    return DenseMatrix(np.eye(n))


def estimate_spectral_norm(op: LinearOperator, iters: int = 100, seed: int = 0) -> float:
    """Lower-biased power-iteration estimate of the spectral norm of ``op``.

    Runs power iteration on A^T A from a seeded random start; deterministic
    for a fixed seed. Returns 0.0 for the zero operator.
    """
    if iters < 1:
        raise ContractViolation("estimate_spectral_norm: iters must be >= 1")
    if op.cols == 0 or op.rows == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.cols)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return 0.0
    v /= nv
    est = 0.0
    for _ in range(iters):
        av = op.matvec(v)
        est = float(np.linalg.norm(av))
        if est == 0.0:
            return 0.0
        v = op.rmatvec(av)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return est
        v /= nv
    return est
