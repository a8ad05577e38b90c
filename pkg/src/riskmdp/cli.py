"""``riskmdp`` command-line interface.

Exit codes: 0 success, 2 invalid input or oracle cap exceeded, 3 I/O
failure, 4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bellman, liquidation, mdpmodel, oracle, solver
from .errors import (
    DistributionError,
    ModelError,
    OracleCapError,
    PolicyIncomplete,
    RiskMdpError,
    RiskSpecError,
    SolverError,
)

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_SOLVER = 0, 2, 3, 4
ORACLE_TOL = 1e-9


class CliExit(Exception):
    def __init__(self, code, message=""):
        super().__init__(message)
        self.code = code


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliExit(EXIT_IO, f"cannot read {path}: {exc}") from exc


def _write(path, text) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise CliExit(EXIT_IO, f"cannot write {path}: {exc}") from exc


def _load_model(path) -> mdpmodel.Model:
    text = _read(path)
    try:
        return mdpmodel.load_model(text)
    except mdpmodel.ValidationError as exc:
        raise CliExit(EXIT_INVALID, json.dumps(exc.diagnostics, indent=1)) from exc
    except ModelError as exc:
        raise CliExit(EXIT_INVALID, str(exc)) from exc


def _threads(args):
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("RISKMDP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliExit(EXIT_INVALID, f"RISKMDP_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _table(model, values) -> str:
    lines = ["t\tstate\tvalue"]
    for t, v in values.items():
        key = "all" if t is None else str(t)
        lines += [f"{key}\t{name}\t{float(v[x])!r}" for x, name in enumerate(model.states)]
    return "\n".join(lines) + "\n"


def _emit(args, model, result, values):
    _write(args.out, mdpmodel.dumps(result.to_json(model)))
    if getattr(args, "table", None):
        _write(args.table, _table(model, values))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    text = _read(args.model)
    try:
        diags = mdpmodel.validate_document(text)
    except ModelError as exc:
        diags = [{"path": "", "message": str(exc)}]
    if diags:
        print(json.dumps(diags, indent=1, sort_keys=True))
        return EXIT_INVALID
    print("OK")
    return EXIT_OK


def cmd_solve(args) -> int:
    model = _load_model(args.model)
    workers = _threads(args)
    try:
        if model.stationary:
            res = solver.solve_infinite(model, tol=args.tol, max_iters=args.max_iters,
                                        mode=args.simplex, workers=workers)
            _emit(args, model, res, {None: res.values})
            print(f"values in [{res.values.min()!r}, {res.values.max()!r}]; "
                  f"j0 = {res.j0!r}; iterations = {res.iters}; residual = {res.residual:.3e}")
            if not res.converged:
                print(f"error: value iteration did not converge within {res.iters} iterations",
                      file=sys.stderr)
                return EXIT_SOLVER
        else:
            res = solver.solve_finite(model, mode=args.simplex, workers=workers)
            _emit(args, model, res, res.values)
            print(f"j0 = {res.j0!r}")
    except SolverError as exc:
        raise CliExit(EXIT_SOLVER, str(exc)) from exc
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = _load_model(args.model)
    try:
        doc = json.loads(_read(args.policy))
    except json.JSONDecodeError as exc:
        raise CliExit(EXIT_INVALID, f"policy file is not JSON: {exc}") from exc
    if isinstance(doc, dict) and "policy" in doc and isinstance(doc["policy"], dict):
        doc = doc["policy"]  # accept a solve result file directly
    workers = _threads(args)
    try:
        policy = bellman.RandomizedPolicy.from_json(model, doc)
        if model.stationary:
            res = solver.evaluate_policy_infinite(model, policy, tol=args.tol,
                                                  max_iters=args.max_iters, workers=workers)
            _emit(args, model, res, {None: res.values})
            print(f"j0 = {res.j0!r}; iterations = {res.iters}")
            if not res.converged:
                print("error: policy evaluation did not converge", file=sys.stderr)
                return EXIT_SOLVER
        else:
            res = solver.evaluate_policy_finite(model, policy, workers=workers)
            _emit(args, model, res, res.values)
            print(f"j0 = {res.j0!r}")
    except PolicyIncomplete as exc:
        raise CliExit(EXIT_INVALID, str(exc)) from exc
    except SolverError as exc:
        raise CliExit(EXIT_SOLVER, str(exc)) from exc
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    model = _load_model(args.model)
    horizon = args.horizon if args.horizon is not None else model.horizon
    if horizon is None:
        raise CliExit(EXIT_INVALID, "--horizon is required for stationary models")
    if not model.stationary and horizon > model.horizon:
        raise CliExit(EXIT_INVALID, f"--horizon {horizon} exceeds the model horizon {model.horizon}")
    size = oracle.tree_size(model if not model.stationary else model.as_finite(horizon), horizon)
    if size > oracle.TREE_NODE_CAP:
        raise CliExit(EXIT_INVALID, f"trajectory tree has up to {size} nodes (cap {oracle.TREE_NODE_CAP})")
    finite = model.as_finite(horizon) if model.stationary else model.truncated(horizon)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.trials):
        policy = bellman.RandomizedPolicy.random(finite, rng)
        a = oracle.tree_risk(finite, policy, horizon)
        b = solver.evaluate_policy_finite(finite, policy).j0
        worst = max(worst, abs(a - b))
    print(f"trials = {args.trials}; max |tree - operator| = {worst:.3e}")
    return EXIT_OK if worst <= ORACLE_TOL else EXIT_SOLVER


def cmd_examples(args) -> int:
    if args.example == "appendix-a":
        r0, r1, rh = oracle.appendix_a()
        c0, c1, _ = oracle.appendix_a_laws()
        lam, val = bellman.simplex_min([c0, c1], oracle.appendix_a_spec())
        print(f"rho(control 0) = {r0!r}")
        print(f"rho(control 1) = {r1!r}")
        print(f"rho(half-half) = {rh!r}")
        print(f"min over mixtures = {val!r} at weights {lam.tolist()}")
        return EXIT_OK

    model, _ = liquidation.build_liquidation(args.ns, args.u0, args.horizon)
    if args.out:
        _write(args.out, mdpmodel.save_model(model))
    res = solver.solve_finite(model, mode=args.simplex, workers=_threads(args))
    if args.result:
        _write(args.result, mdpmodel.dumps(res.to_json(model)))
    print(f"states = {model.n_states}; j0 = {res.j0!r}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="riskmdp", description="Risk-averse MDP solver.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for state sweeps (default: $RISKMDP_THREADS or all cores)")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a model file")
    v.add_argument("--model", required=True)
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("solve", parents=[common], help="optimal values and policy")
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--max-iters", type=int, default=None)
    s.add_argument("--simplex", choices=("auto", "vertex", "grid"), default="auto")
    s.add_argument("--table", default=None, metavar="PATH", help="also write a TSV value table")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("evaluate", parents=[common], help="value of a given policy")
    e.add_argument("--model", required=True)
    e.add_argument("--policy", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--tol", type=float, default=1e-8)
    e.add_argument("--max-iters", type=int, default=None)
    e.add_argument("--table", default=None, metavar="PATH")
    e.set_defaults(func=cmd_evaluate)

    o = sub.add_parser("oracle-check", help="compare tree recursion with operator evaluation")
    o.add_argument("--model", required=True)
    o.add_argument("--horizon", type=int, default=None)
    o.add_argument("--trials", type=int, default=20)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_oracle_check)

    x = sub.add_parser("examples", parents=[common], help="built-in examples")
    x.add_argument("example", choices=("appendix-a", "liquidation"))
    x.add_argument("--ns", type=int, default=2, help="highest price level")
    x.add_argument("--u0", type=int, default=2, help="initial inventory")
    x.add_argument("--horizon", type=int, default=2)
    x.add_argument("--out", default=None, help="where to write the generated model")
    x.add_argument("--result", default=None, help="where to write the solve result")
    x.add_argument("--simplex", choices=("auto", "vertex", "grid"), default="auto")
    x.set_defaults(func=cmd_examples)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliExit as exc:
        if str(exc):
            print(str(exc) if exc.code == EXIT_INVALID and str(exc).startswith("[")
                  else f"error: {exc}", file=sys.stderr)
        return exc.code
    except (OracleCapError, ModelError, DistributionError, RiskSpecError, PolicyIncomplete) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except RiskMdpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
