"""Reading and writing problem and result files.

Problems are stored as JSON with an explicit version tag, a constraint
section (dense row lists or CSR arrays), a cost section holding one or
many cost vectors, and a solver section.  Unknown fields are rejected and
all array lengths are checked at parse time.  The writer emits a canonical
field order so generate -> parse -> generate round-trips byte-identically.
"""
from __future__ import annotations

import json

import numpy as np

from .canonical import GeneralConstraints
from .errors import ContractViolation
from .operators import CsrMatrix, DenseMatrix
from .solver import SolverConfig

FORMAT_VERSION = 1


class ParseError(ValueError):
    """The input file does not conform to the problem schema."""


def _require_keys(obj, allowed, required, where):
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ParseError(f"{where}: unknown fields {sorted(unknown)}")
    missing = set(required) - set(obj)
    if missing:
        raise ParseError(f"{where}: missing fields {sorted(missing)}")


def _vector(raw, length, where):
    try:
        v = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: not a numeric array") from exc
    if v.ndim != 1:
        raise ParseError(f"{where}: expected a flat array")
    if length is not None and len(v) != length:
        raise ParseError(f"{where}: expected length {length}, got {len(v)}")
    if not np.all(np.isfinite(v)):
        raise ParseError(f"{where}: entries must be finite")
    return v


def _matrix(raw, fmt, n_cols, where):
    if raw is None:
        return None
    if fmt == "dense":
        _require_keys(raw, ("rows", "cols", "data"), ("rows", "cols", "data"), where)
        data = np.asarray(raw["data"], dtype=np.float64)
        if data.size == 0:
            data = data.reshape(int(raw["rows"]), int(raw["cols"]))
        if data.ndim != 2 or data.shape != (int(raw["rows"]), int(raw["cols"])):
            raise ParseError(f"{where}: data shape disagrees with rows/cols")
        if data.shape[1] != n_cols:
            raise ParseError(f"{where}: expected {n_cols} columns")
        return DenseMatrix(data)
    if fmt == "csr":
        fields = ("rows", "cols", "row_offsets", "col_indices", "values")
        _require_keys(raw, fields, fields, where)
        if int(raw["cols"]) != n_cols:
            raise ParseError(f"{where}: expected {n_cols} columns")
        try:
            return CsrMatrix(
                int(raw["rows"]),
                int(raw["cols"]),
                raw["row_offsets"],
                raw["col_indices"],
                raw["values"],
            )
        except ContractViolation as exc:
            raise ParseError(f"{where}: {exc}") from exc
    raise ParseError(f"{where}: unknown matrix format {fmt!r}")


def parse_problem(text: str):
    """Parse a problem file into (GeneralConstraints, cost batch, SolverConfig)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    _require_keys(
        doc,
        ("version", "constraints", "costs", "solver"),
        ("version", "constraints", "costs"),
        "document",
    )
    if doc["version"] != FORMAT_VERSION:
        raise ParseError(f"unsupported version {doc['version']!r}")

    cons = doc["constraints"]
    allowed = ("format", "a1", "b1", "a2", "b2", "a3", "b3", "lower", "upper")
    _require_keys(cons, allowed, ("format", "lower", "upper"), "constraints")
    fmt = cons["format"]
    lower = _vector(cons["lower"], None, "constraints.lower")
    upper = _vector(cons["upper"], len(lower), "constraints.upper")
    n = len(lower)

    def group(tag):
        a = _matrix(cons.get(tag), fmt, n, f"constraints.{tag}")
        b_raw = cons.get("b" + tag[1])
        if (a is None) != (b_raw is None):
            raise ParseError(f"constraints: {tag} and b{tag[1]} must appear together")
        if a is None:
            return None, None
        return a, _vector(b_raw, a.rows, f"constraints.b{tag[1]}")

    a1, b1 = group("a1")
    a2, b2 = group("a2")
    a3, b3 = group("a3")
    try:
        gc = GeneralConstraints.build(
            a1=a1, b1=b1, a2=a2, b2=b2, a3=a3, b3=b3, lower=lower, upper=upper
        )
    except ContractViolation as exc:
        raise ParseError(str(exc)) from exc

    costs_raw = doc["costs"]
    if not isinstance(costs_raw, list) or not costs_raw:
        raise ParseError("costs: expected a non-empty list of vectors")
    costs = [_vector(cv, n, f"costs[{i}]") for i, cv in enumerate(costs_raw)]

    solver = doc.get("solver", {})
    allowed = ("theta", "epsilon", "l0", "delta", "max_iter")
    _require_keys(solver, allowed, (), "solver")
    try:
        cfg = SolverConfig(
            theta=float(solver.get("theta", 1.0)),
            epsilon=float(solver.get("epsilon", 1e-6)),
            l0=None if solver.get("l0") is None else float(solver["l0"]),
            delta=None if solver.get("delta") is None else float(solver["delta"]),
            max_iter=int(solver.get("max_iter", 100_000)),
        )
    except (TypeError, ValueError, ContractViolation) as exc:
        raise ParseError(f"solver: {exc}") from exc
    return gc, costs, cfg


def _matrix_doc(op):
    if op is None or op.rows == 0:
        return None
    if isinstance(op, DenseMatrix):
        return {
            "rows": op.rows,
            "cols": op.cols,
            "data": [[float(v) for v in row] for row in op.entries],
        }
    csr = op.to_scipy()
    csr.sort_indices()
    return {
        "rows": op.rows,
        "cols": op.cols,
        "row_offsets": [int(i) for i in csr.indptr],
        "col_indices": [int(i) for i in csr.indices],
        "values": [float(v) for v in csr.data],
    }


def problem_doc(gc: GeneralConstraints, costs, cfg: SolverConfig):
    """Canonically ordered document for a problem file."""
    fmt = "csr" if gc.is_sparse() else "dense"
    cons = {"format": fmt}
    for tag, op, rhs in (("a1", gc.a1, gc.b1), ("a2", gc.a2, gc.b2), ("a3", gc.a3, gc.b3)):
        mdoc = _matrix_doc(op)
        if mdoc is not None:
            cons[tag] = mdoc
            cons["b" + tag[1]] = [float(v) for v in rhs]
    cons["lower"] = [float(v) for v in gc.lower]
    cons["upper"] = [float(v) for v in gc.upper]
    return {
        "version": FORMAT_VERSION,
        "constraints": cons,
        "costs": [[float(v) for v in c] for c in costs],
        "solver": {
            "theta": cfg.theta,
            "epsilon": cfg.epsilon,
            "l0": cfg.l0,
            "delta": cfg.delta,
            "max_iter": cfg.max_iter,
        },
    }


def dump_problem(gc, costs, cfg) -> str:
    return json.dumps(problem_doc(gc, costs, cfg), indent=2) + "\n"
