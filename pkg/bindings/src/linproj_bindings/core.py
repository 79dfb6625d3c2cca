"""Flat foreign-callable surface over the projection layer.

The interface mirrors a C ABI: integer handles instead of objects,
contiguous row-major float64 matrices at the boundary, and a single-use
context token linking each forward batch to its backward call.  Errors are
raised as BindingError carrying the core's diagnostic text so a host
runtime can rethrow them verbatim.

By default only the cost gradient dl/dc' crosses the boundary, matching
the training setup where constraints are fixed data.  A handle built with
full_gradients=True returns the constraint gradients as well, reported in
the canonical standard form (b, u, and A include slack coordinates).
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass

import numpy as np

from linproj import (
    AdjointSeed,
    CertifiedInfeasible,
    ContractViolation,
    GeneralConstraints,
    SolverConfig,
    Status,
    backward,
    build_layer,
    project,
    project_backward,
)
from linproj.canonical import lift_seed


class BindingError(RuntimeError):
    """Any failure crossing the foreign boundary."""


@dataclass(frozen=True)
class _LayerEntry:
    layer: object
    full_gradients: bool


_lock = threading.Lock()
_layers: dict[int, _LayerEntry] = {}
_contexts: dict[int, tuple[int, list]] = {}
_handle_ids = itertools.count(1)
_token_ids = itertools.count(1)


def _matrix(arr, name):
    if arr is None:
        return None
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out.ndim != 2:
        raise BindingError(f"{name} must be a 2-d matrix")
    return out


def ffi_build(lower, upper, a1=None, b1=None, a2=None, b2=None, a3=None, b3=None,
              theta=1.0, epsilon=1e-6, max_iter=100_000,
              full_gradients=False) -> int:
    """Create a layer handle from raw constraint arrays.

    Returns an opaque integer handle; the caller must release it with
    ffi_free.  Infeasible or malformed constraints raise BindingError.
    """
    try:
        gc = GeneralConstraints.build(
            a1=_matrix(a1, "a1"), b1=b1,
            a2=_matrix(a2, "a2"), b2=b2,
            a3=_matrix(a3, "a3"), b3=b3,
            lower=np.ascontiguousarray(lower, dtype=np.float64),
            upper=np.ascontiguousarray(upper, dtype=np.float64),
        )
        cfg = SolverConfig(theta=float(theta), epsilon=float(epsilon),
                           max_iter=int(max_iter))
        layer = build_layer(gc, cfg)
    except (ContractViolation, CertifiedInfeasible) as exc:
        raise BindingError(str(exc)) from exc
    handle = next(_handle_ids)
    with _lock:
        _layers[handle] = _LayerEntry(layer=layer, full_gradients=bool(full_gradients))
    return handle


def ffi_dimensions(handle: int) -> tuple[int, int]:
    """(n', m): cost width and equality row count for foreign shape checks."""
    entry = _entry(handle)
    return entry.layer.n_original, entry.layer.m


def _entry(handle: int) -> _LayerEntry:
    with _lock:
        entry = _layers.get(handle)
    if entry is None:
        raise BindingError(f"unknown or freed handle {handle}")
    return entry


def _batch(arr, width, name):
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out.ndim != 2:
        raise BindingError(f"{name} must have shape (batch, {width})")
    if out.shape[1] != width:
        raise BindingError(
            f"{name} width mismatch: expected {width}, got {out.shape[1]}"
        )
    return out


def ffi_project(handle: int, c_batch):
    """Project each row of c_batch; returns (x_batch, context token).

    The token must be passed to exactly one ffi_backward call.  Rows that
    fail to converge abort the whole batch with an error naming them.
    """
    entry = _entry(handle)
    c_batch = _batch(c_batch, entry.layer.n_original, "c_batch")
    try:
        results = project(entry.layer, list(c_batch))
    except ContractViolation as exc:
        raise BindingError(str(exc)) from exc
    failed = [i for i, r in enumerate(results)
              if r.solution.status is not Status.CONVERGED]
    if failed:
        raise BindingError(f"instances did not converge: rows {failed}")
    x_batch = np.ascontiguousarray(np.stack([r.x_original for r in results]))
    token = next(_token_ids)
    with _lock:
        _contexts[token] = (handle, results)
    return x_batch, token


def ffi_backward(handle: int, token: int, seed_batch):
    """Consume a context token and return gradients for its batch.

    Default: the (batch, n') matrix dl/dc'.  With full_gradients the return
    value is a dict with keys "c", "b", "u", "A"; the last three are in
    canonical standard-form coordinates.
    """
    entry = _entry(handle)
    with _lock:
        ctx = _contexts.pop(token, None)
    if ctx is None:
        raise BindingError(f"context token {token} already consumed or unknown")
    ctx_handle, results = ctx
    if ctx_handle != handle:
        raise BindingError("context token belongs to a different handle")
    seed_batch = _batch(seed_batch, entry.layer.n_original, "seed_batch")
    if seed_batch.shape[0] != len(results):
        raise BindingError(
            f"seed_batch rows mismatch: expected {len(results)}, "
            f"got {seed_batch.shape[0]}"
        )
    try:
        grads_c = project_backward(entry.layer, results, list(seed_batch))
    except ContractViolation as exc:
        raise BindingError(str(exc)) from exc
    grad_c = np.ascontiguousarray(np.stack(grads_c))
    if not entry.full_gradients:
        return grad_c
    db, du, da = [], [], []
    for res, seed in zip(results, seed_batch):
        bundle = backward(
            res.context.ep,
            res.context.solution,
            AdjointSeed(dl_dx=lift_seed(seed, entry.layer.embedding)),
        )
        db.append(bundle.dl_db)
        du.append(bundle.dl_du)
        da.append(bundle.dl_da.to_dense())
    return {
        "c": grad_c,
        "b": np.ascontiguousarray(np.stack(db)),
        "u": np.ascontiguousarray(np.stack(du)),
        "A": np.ascontiguousarray(np.stack(da)),
    }


def ffi_free(handle: int) -> None:
    """Release a handle and drop any unconsumed context tokens for it."""
    with _lock:
        if _layers.pop(handle, None) is None:
            raise BindingError(f"unknown or freed handle {handle}")
        stale = [t for t, (h, _) in _contexts.items() if h == handle]
        for t in stale:
            del _contexts[t]
