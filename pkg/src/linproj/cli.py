"""Command-line front end: project | gradcheck | bench | generate.

Exit codes are a stable contract for harness scripting:
0 success, 2 input error, 3 certified infeasible, 4 solver non-convergence.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .backward import AdjointSeed
from .canonical import canonicalize
from .dual import EntropicProblem
from .errors import CertifiedInfeasible, ContractViolation
from .fixtures import FAMILIES, generate
from .gradcheck import check_gradients
from .layer import build_layer, project
from .problemfile import ParseError, dump_problem, parse_problem
from .solver import Status, SolverConfig, solve

EXIT_OK = 0


class _LoggedResult:
    """Minimal stand-in for ProjectionResult on the --log-steps path."""

    def __init__(self, x_original, solution):
        self.x_original = x_original
        self.solution = solution
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_NO_CONVERGENCE = 4


def _apply_overrides(cfg: SolverConfig, args) -> SolverConfig:
    changes = {}
    if args.theta is not None:
        changes["theta"] = args.theta
    if args.epsilon is not None:
        changes["epsilon"] = args.epsilon
    if getattr(args, "max_iter", None) is not None:
        changes["max_iter"] = args.max_iter
    return replace(cfg, **changes) if changes else cfg


def _matrix_doc_dense(a):
    return {"rows": a.rows, "cols": a.cols, "data": [[float(v) for v in r] for r in a.to_dense()]}


def cmd_project(args) -> int:
    try:
        text = open(args.input).read()
        gc, costs, cfg = parse_problem(text)
    except (OSError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    cfg = _apply_overrides(cfg, args)
    try:
        layer = build_layer(gc, cfg)
    except CertifiedInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE

    if args.log_steps:
        from .canonical import lift_cost, recover

        results = []
        for i, c in enumerate(costs):
            ep = EntropicProblem(layer.standard, lift_cost(c, layer.embedding), cfg.theta)
            sol = solve(ep, cfg, log_steps=True)
            for rec in sol.steps:
                print(json.dumps({
                    "instance": i,
                    "iteration": rec.iteration,
                    "m_estimate": rec.m_estimate,
                    "residual": rec.residual,
                    "dual_value": rec.dual_value,
                }))
            results.append(_LoggedResult(recover(sol.x, layer.embedding), sol))
    elif args.parallel > 1:
        with ThreadPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(lambda c: project(layer, [c])[0], costs))
    else:
        results = project(layer, costs)

    doc = {
        "version": 1,
        "results": [
            {
                "x": [float(v) for v in r.x_original],
                "residual": r.solution.residual,
                "iterations": r.solution.iterations,
                "status": r.solution.status.value,
            }
            for r in results
        ],
    }
    if args.standard_form:
        std = layer.standard
        from .canonical import lift_cost

        doc["standard_form"] = {
            "a": _matrix_doc_dense(std.a),
            "b": [float(v) for v in std.b],
            "u": [float(v) for v in std.u],
            "costs": [[float(v) for v in lift_cost(c, layer.embedding)] for c in costs],
        }
    out = json.dumps(doc, indent=2) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    all_ok = all(r.solution.status is Status.CONVERGED for r in results)
    return EXIT_OK if all_ok else EXIT_NO_CONVERGENCE


def cmd_gradcheck(args) -> int:
    try:
        text = open(args.input).read()
        gc, costs, cfg = parse_problem(text)
    except (OSError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    cfg = _apply_overrides(cfg, args)
    if gc.n_vars > args.max_vars:
        print(
            f"error: instance too large for finite differences "
            f"({gc.n_vars} > {args.max_vars} variables)",
            file=sys.stderr,
        )
        return EXIT_INPUT
    try:
        std, c = canonicalize(gc, costs[0])
    except CertifiedInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    ep = EntropicProblem(std, c, cfg.theta)
    rng = np.random.default_rng(args.seed)
    seed = AdjointSeed(dl_dx=rng.uniform(-1.0, 1.0, ep.n))
    try:
        errors = check_gradients(ep, seed)
    except ContractViolation as exc:
        print(f"error: solver failure during gradcheck: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    ok = True
    for block in ("c", "b", "u", "A"):
        err = errors[block]
        ok = ok and err <= args.tolerance
        print(f"grad[{block}] max relative error: {err:.3e}")
    print("gradcheck:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else 1


def _parse_params(items):
    params = {}
    for item in items:
        if "=" not in item:
            raise ParseError(f"malformed parameter {item!r}, expected key=value")
        key, val = item.split("=", 1)
        if ":" in val:
            params[key] = [int(v) for v in val.split(":")]
        else:
            try:
                params[key] = int(val)
            except ValueError:
                params[key] = float(val)
    return params


def cmd_generate(args) -> int:
    if args.family not in FAMILIES:
        print(f"error: unknown family {args.family!r}; choose from {FAMILIES}",
              file=sys.stderr)
        return EXIT_INPUT
    try:
        params = _parse_params(args.param)
        gc = generate(args.family, params, sparse=args.sparse)
    except (ParseError, ContractViolation, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    rng = np.random.default_rng(args.seed)
    costs = [rng.uniform(-1.0, 1.0, gc.n_vars) for _ in range(args.costs)]
    cfg = SolverConfig(
        theta=args.theta if args.theta is not None else 1.0,
        epsilon=args.epsilon if args.epsilon is not None else 1e-6,
    )
    text = dump_problem(gc, costs, cfg)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.family not in FAMILIES:
        print(f"error: unknown family {args.family!r}", file=sys.stderr)
        return EXIT_INPUT
    try:
        params = _parse_params(args.param)
        gc = generate(args.family, params, sparse=args.sparse)
    except (ParseError, ContractViolation, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    thetas = [float(t) for t in args.theta_sweep.split(",")]
    epsilons = [float(e) for e in args.epsilon_sweep.split(",")]
    rng = np.random.default_rng(args.seed)
    cost = rng.uniform(-1.0, 1.0, gc.n_vars)
    print("family\tn\tm\ttheta\tepsilon\titerations\tbacktracks\twall_time\tresidual")
    for theta in thetas:
        for eps in epsilons:
            cfg = SolverConfig(theta=theta, epsilon=eps, max_iter=args.max_iter or 100_000)
            try:
                layer = build_layer(gc, cfg)
            except CertifiedInfeasible as exc:
                print(f"infeasible: {exc}", file=sys.stderr)
                return EXIT_INFEASIBLE
            iters = backs = 0
            wall = 0.0
            res = 0.0
            for _ in range(args.reps):
                t0 = time.perf_counter()
                result = project(layer, [cost])[0]
                wall += time.perf_counter() - t0
                iters += result.solution.iterations
                backs += result.solution.backtracks
                res = result.solution.residual
            print(
                f"{args.family}\t{layer.standard.n}\t{layer.standard.m}\t"
                f"{theta:g}\t{eps:g}\t{iters // args.reps}\t{backs // args.reps}\t"
                f"{wall / args.reps:.6f}\t{res:.3e}"
            )
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="linproj",
        description="Differentiable projection onto general linear constraints",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="project cost vectors from a problem file")
    p.add_argument("input")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--standard-form", action="store_true")
    p.add_argument("--log-steps", action="store_true")
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("gradcheck", help="finite-difference check of the backward pass")
    p.add_argument("input")
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--max-vars", type=int, default=64)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench", help="iteration-count sweeps over theta and epsilon")
    p.add_argument("--family", required=True)
    p.add_argument("--param", action="append", default=[])
    p.add_argument("--theta-sweep", default="10,40,160")
    p.add_argument("--epsilon-sweep", default="1e-6")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sparse", action="store_true")
    p.add_argument("--max-iter", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("generate", help="write a fixture as a problem file")
    p.add_argument("family")
    p.add_argument("--param", action="append", default=[])
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--costs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sparse", action="store_true")
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
