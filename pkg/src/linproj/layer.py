"""User-facing projection layer over fixed constraints.

Canonicalization and the spectral-norm estimate are computed once per
constraint set; each projection only swaps in a new cost vector.  This
matches the dominant usage pattern of projecting thousands of score
vectors against one constraint description.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .backward import AdjointSeed, backward
from .canonical import (
    Embedding,
    GeneralConstraints,
    StandardProblem,
    canonicalize,
    lift_cost,
    lift_seed,
    project_gradient,
    recover,
)
from .dual import EntropicProblem
from .errors import ContractViolation
from .operators import estimate_spectral_norm
from .solver import Solution, SolverConfig, solve


@dataclass(frozen=True)
class BackwardContext:
    """Everything the implicit backward pass needs from one forward solve."""

    ep: EntropicProblem
    solution: Solution
    consumed: bool = False


@dataclass(frozen=True)
class ProjectionResult:
    x_original: np.ndarray
    solution: Solution
    context: BackwardContext


@dataclass(frozen=True)
class ProjectionLayer:
    standard: StandardProblem
    embedding: Embedding
    config: SolverConfig
    norm_estimate: float

    @property
    def n_original(self):
        return self.embedding.n_original

    @property
    def m(self):
        return self.standard.m


def build_layer(gc: GeneralConstraints, cfg: SolverConfig) -> ProjectionLayer:
    """Canonicalize once and cache the embedding and norm estimate."""
    std, _ = canonicalize(gc, np.zeros(gc.n_vars))
    norm = estimate_spectral_norm(std.a, iters=100, seed=0)
    return ProjectionLayer(
        standard=std, embedding=std.embedding, config=cfg, norm_estimate=norm
    )


def _project_one(layer: ProjectionLayer, c_prime) -> ProjectionResult:
    c_prime = np.asarray(c_prime, dtype=np.float64)
    if not np.all(np.isfinite(c_prime)):
        raise ContractViolation("cost vector must be finite")
    c = lift_cost(c_prime, layer.embedding)
    ep = EntropicProblem(layer.standard, c, layer.config.theta)
    sol = solve(ep, layer.config)
    x_orig = recover(sol.x, layer.embedding)
    return ProjectionResult(
        x_original=x_orig,
        solution=sol,
        context=BackwardContext(ep=ep, solution=sol),
    )


def project(layer: ProjectionLayer, c_batch) -> list[ProjectionResult]:
    """Project each cost vector independently; output order follows input."""
    return [_project_one(layer, c) for c in c_batch]


def project_backward(layer: ProjectionLayer, results, seeds) -> list[np.ndarray]:
    """Return dl/dc' per instance given dl/dx' seeds.

    Seeds are lifted into canonical space (zero on slacks), pushed through
    the implicit backward pass, and restricted back; fixed-eliminated
    variables receive gradient 0 and the constant lower-bound shift passes
    gradients through unchanged.
    """
    results = list(results)
    seeds = list(seeds)
    if len(results) != len(seeds):
        raise ContractViolation("results/seeds length mismatch")
    out = []
    for res, seed_prime in zip(results, seeds):
        seed_std = lift_seed(seed_prime, layer.embedding)
        bundle = backward(
            res.context.ep,
            res.context.solution,
            AdjointSeed(dl_dx=seed_std),
        )
        out.append(project_gradient(bundle.dl_dc, layer.embedding))
    return out


def with_config(layer: ProjectionLayer, **changes) -> ProjectionLayer:
    """A copy of the layer with solver parameters replaced."""
    return replace(layer, config=replace(layer.config, **changes))
