"""Command line entry point: ``netbargain {run,verify,oracle,fptas,gen}``.

Reports are JSON on stdout and traces are JSON lines. Both carry
``"schema": 1``. Exit codes:

  0  success (an UNSTABLE verdict is a successful answer)
  1  a requested check failed
  2  usage or configuration error
  3  file could not be read or written
  4  file could not be parsed
  5  instance or outcome failed validation
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from . import generators as gen
from . import instance as inst_mod
from . import oracle
from . import outcomes as oc
from . import rebalance

SCHEMA = 1

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_IO, EXIT_PARSE, EXIT_INVALID = range(6)


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _num(x):
    """JSON-friendly number: exact integers stay ints, everything else a float."""
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else float(x)
    return float(x)


def _load_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_PARSE, f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _load_instance(path: str) -> inst_mod.NetworkInstance:
    data = _load_json(path)
    try:
        return inst_mod.from_dict(data)
    except inst_mod.InstanceError as exc:
        code = EXIT_INVALID if str(exc).startswith("invalid instance") else EXIT_PARSE
        raise CliError(code, f"{path}: {exc}") from None


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc.strerror}") from None


def _emit(report: dict) -> None:
    print(json.dumps({"schema": SCHEMA, **report}, indent=1))


def _pairs(instance, matching):
    if matching is None:
        return None
    return [list(p) for p in oc.matching_pairs(instance, matching)]


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# -- run -------------------------------------------------------------------------

def _initial_state(args, instance) -> np.ndarray:
    spec = args.alpha0
    if spec.startswith("file:"):
        path = spec[5:]
        data = _load_json(path)
        try:
            alpha = gen.alpha_from_dict(instance, data)
        except (KeyError, ValueError, TypeError, AttributeError) as exc:
            raise CliError(EXIT_PARSE, f"{path}: bad message file ({exc})") from None
        return alpha
    try:
        return dyn.initial_alpha(instance, spec, args.seed)
    except dyn.ConfigError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None


def cmd_run(args) -> int:
    instance = _load_instance(args.instance)
    # the dynamics commute with scaling, so run at the original scale and
    # convert the unit-scale target instead of rescaling the messages
    W = instance.w_max if instance.w_max > 0 else 1.0
    config = dyn.DynamicsConfig(
        mode=args.mode, kappa=args.kappa, schedule=args.schedule, node_kappa=args.node_kappa,
        kappa_seq=args.kappa_seq, max_iters=args.max_iters, target_eps=args.eps * W,
        record_every=args.record_every)
    alpha0 = _initial_state(args, instance)

    lines: list[str] = []

    def on_record(t, a, res):
        gamma = dyn.compute_earnings(instance, dyn.compute_offers(instance, a, config.mode))
        induced = oc.induced_matching(instance, a, mode=config.mode)
        lines.append(json.dumps({"schema": SCHEMA, "t": t, "residual": res,
                                 "gamma": gamma.tolist(), "induced": _pairs(instance, induced)}))

    try:
        alpha, trace = dyn.run(instance, alpha0, config, on_record if args.trace else None)
    except dyn.ConfigError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None
    if args.trace:
        _write(args.trace, "".join(line + "\n" for line in lines))

    gamma = trace.earnings_snapshots[-1][1]
    induced = trace.induced_matching_history[-1][1]
    unit_res = trace.final_residual / W
    report = {
        "command": "run",
        "config": {"instance": args.instance, "kappa": args.kappa, "eps": args.eps, "max_iters": args.max_iters,
                   "mode": config.mode, "schedule": args.schedule, "alpha0": args.alpha0, "seed": args.seed},
        "scale": W,
        "stop_reason": trace.stop_reason,
        "iterations": trace.iterations,
        "final_residual": trace.final_residual,
        "final_residual_unit": unit_res,
        "gamma": gamma.tolist(),
        "induced_matching": _pairs(instance, induced),
    }
    if 0 < args.kappa < 1 and args.eps > 0:
        report["rate_bound_iterations"] = dyn.rate_bound_iterations(args.kappa, args.eps)
    code = EXIT_OK
    if args.verify:
        checks = _verify_state(instance, alpha, induced, unit_res, config.mode, W)
        report["checks"] = checks
        if not checks["passed"]:
            code = EXIT_CHECK
    _emit(report)
    return code


def _verify_state(instance, alpha, induced, unit_res, mode, W) -> dict:
    tol = max(6 * unit_res, 1e-8) * W
    checks: dict = {"tolerance": tol, "induced_matching": induced is not None}
    passed = induced is not None
    if induced is not None:
        outcome = oc.TradeOutcome.from_state(instance, alpha, induced, mode)
        problems = oc.outcome_violations(instance, outcome, 1e-9 * W)
        checks["outcome_problems"] = problems
        if problems:
            passed = False
        else:
            checks["stable"] = oc.is_stable(instance, outcome, tol)
            checks["balance_residual"] = oc.balance_residual(instance, outcome)
            passed &= checks["stable"]
            if mode == dyn.UD and instance.unit_capacities:
                checks["ud_residual"] = oc.correct_division_residual(instance, outcome)
                passed &= checks["ud_residual"] <= tol
            else:
                passed &= checks["balance_residual"] <= tol
    if instance.m <= oracle.DEFAULT_CONFIG.subset_guard:
        lp = oracle.solve_lp(instance)
        summary = {"objective": _num(lp.objective), "integral": lp.integral, "unique_integral": lp.unique_integral}
        if lp.unique_integral:
            summary["matches_optimum"] = induced == lp.matching()
            passed &= summary["matches_optimum"]
        checks["oracle"] = summary
    checks["passed"] = bool(passed)
    return checks


# -- verify ------------------------------------------------------------------------

def cmd_verify(args) -> int:
    instance = _load_instance(args.instance)
    data = _load_json(args.outcome)
    try:
        outcome = oc.outcome_from_dict(instance, data)
    except oc.MalformedOutcomeError as exc:
        raise CliError(EXIT_PARSE, f"{args.outcome}: {exc}") from None
    problems = oc.outcome_violations(instance, outcome)
    report = {"command": "verify", "eps": args.eps, "valid": not problems, "problems": problems}
    if problems:
        _emit(report)
        return EXIT_INVALID
    unstable = oc.check_stability(instance, outcome)
    report["stable"] = not unstable
    report["blocking_pairs"] = [list(p) for p in unstable]
    report["gamma"] = outcome.earnings(instance).tolist()
    report["balance_residual"] = oc.balance_residual(instance, outcome)
    report["eps_nb"] = oc.is_eps_nb(instance, outcome, args.eps)
    ok = report["eps_nb"]
    if instance.unit_capacities:
        report["ud_residual"] = oc.correct_division_residual(instance, outcome)
        report["eps_ud"] = oc.is_eps_ud(instance, outcome, args.eps)
        if args.mode == dyn.UD:
            ok = report["eps_ud"]
    _emit(report)
    return EXIT_OK if ok else EXIT_CHECK


# -- oracle ---------------------------------------------------------------------------

def cmd_oracle(args) -> int:
    instance = _load_instance(args.instance)
    config = oracle.OracleConfig(args.subset_guard, args.half_guard)
    lp = oracle.solve_lp(instance, certify_unique=False)
    gap = oracle.lp_gap(instance, config)
    lp.unique_integral = lp.integral and gap.unique
    report = {
        "command": "oracle",
        "objective": _num(lp.objective),
        "objective_exact": str(lp.objective),
        "dual_objective": str(lp.dual_objective),
        "integral": lp.integral,
        "unique_integral": lp.unique_integral,
        "lp_gap": str(gap.g),
        "gap_method": gap.method,
        "matching_gap": str(oracle.matching_gap(instance, config)) if lp.unique_integral else "0",
        "x": {f"{i}-{j}": str(v) for (i, j), v in zip(instance.edge_pairs(), lp.x)},
        "y_nodes": [str(v) for v in lp.y_nodes],
        "complementary_slackness": oracle.check_complementary_slackness(instance, lp),
        "matching": _pairs(instance, lp.matching()),
    }
    if lp.y_edges is not None:
        report["y_edges"] = {f"{i}-{j}": str(v) for (i, j), v in zip(instance.edge_pairs(), lp.y_edges)}
    stable = oracle.stable_outcome_from_dual(instance, lp, config)
    report["stable_outcome"] = None if stable is None else oc.outcome_to_dict(instance, stable)
    _emit(report)
    return EXIT_OK


# -- fptas -------------------------------------------------------------------------------

def cmd_fptas(args) -> int:
    instance = _load_instance(args.instance)
    res = rebalance.fptas(instance, args.eps, args.kappa, args.max_iters)
    report = {"command": "fptas", "eps": args.eps, "kappa": args.kappa, "status": res.status,
              "message": res.message, "scale": res.scale}
    if res.status == rebalance.ERROR:
        _emit(report)
        return EXIT_CONFIG
    if res.outcome is not None:
        report.update({
            "iterations": res.iterations,
            "iteration_bound": rebalance.RebalanceConfig(args.kappa, args.eps / res.scale).bound(),
            "final_gap": res.final_gap,
            "gamma": res.gamma.tolist(),
            "outcome": oc.outcome_to_dict(instance, res.outcome),
            "eps_ud": oc.is_eps_ud(instance, res.outcome, args.eps),
            "audit": [{"t": t, "stable": s, "sum_drift": d} for t, s, d in res.audit],
        })
        if args.out:
            oc.save_outcome(instance, res.outcome, args.out)
    _emit(report)
    return EXIT_OK if res.status in (rebalance.OK, rebalance.UNSTABLE) else EXIT_CHECK


# -- gen -----------------------------------------------------------------------------------

def cmd_gen(args) -> int:
    try:
        if args.kind == "chain":
            case = gen.chain_example()
        elif args.kind == "g1":
            case = gen.g1_example()
        elif args.kind == "ring":
            case = gen.ring_slow_instance(args.N, args.r)
        elif args.kind == "bipartite":
            case = gen.random_bipartite(args.n1, args.n2, args.p, args.weights, args.seed, args.digits)
        else:
            case = gen.random_instance(args.n, args.p, args.seed, max_b=args.max_b, weight_dist=args.weights,
                                       digits=args.digits)
        instance = case.instance
        if args.eta:
            instance = gen.perturb(instance, args.eta, args.seed)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None
    _write(args.out, json.dumps(inst_mod.to_dict(instance), indent=1) + "\n")
    written = [args.out]
    if args.alpha_out:
        if case.alpha0 is None:
            raise CliError(EXIT_CONFIG, f"generator {args.kind!r} has no message state")
        _write(args.alpha_out, json.dumps(gen.alpha_to_dict(instance, case.alpha0), indent=1) + "\n")
        written.append(args.alpha_out)
    _emit({"command": "gen", "kind": args.kind, "nodes": instance.n, "edges": instance.m, "written": written})
    return EXIT_OK


# -- parser -------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netbargain", description="Bargaining dynamics on exchange networks.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="iterate the message-passing dynamics")
    r.add_argument("instance", help="instance JSON file")
    r.add_argument("--kappa", type=float, default=0.5, help="damping factor in (0, 1] (default 0.5)")
    r.add_argument("--eps", type=float, default=0.0,
                   help="stop once the residual, measured with weights rescaled to max 1, is <= EPS")
    r.add_argument("--max-iters", type=int, default=10_000, help="iteration cap (default 10000)")
    r.add_argument("--mode", choices=[dyn.EQUAL, dyn.UD], default=dyn.EQUAL,
                   help="equal split or per-edge split fractions")
    r.add_argument("--schedule", choices=list(dyn.SCHEDULES), default=dyn.SYNC, help="update schedule")
    r.add_argument("--node-kappa", type=_float_list, help="per-node damping for node-damped, comma separated")
    r.add_argument("--kappa-seq", type=_float_list,
                   help="damping sequence for time-varying, comma separated; the last value repeats")
    r.add_argument("--alpha0", default="zero", help="initial messages: zero, uniform or file:PATH")
    r.add_argument("--seed", type=int, default=0, help="seed for --alpha0 uniform")
    r.add_argument("--record-every", type=int, default=1, help="trace cadence in iterations")
    r.add_argument("--trace", help="write a JSONL trace here")
    r.add_argument("--verify", action="store_true",
                   help="check the final outcome (and compare with the exact oracle when small enough)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="certify a trade outcome file")
    v.add_argument("instance")
    v.add_argument("outcome", help='outcome JSON: {"matching": [[i, j], ...], "shares": {"i->j": x}}')
    v.add_argument("--eps", type=float, default=1e-6, help="tolerance for the balance/division checks")
    v.add_argument("--mode", choices=[dyn.EQUAL, dyn.UD], default=dyn.EQUAL,
                   help="which solution concept decides the exit code")
    v.set_defaults(func=cmd_verify)

    o = sub.add_parser("oracle", help="exact LP, dual, gap and stable-outcome certificate")
    o.add_argument("instance")
    o.add_argument("--subset-guard", type=int, default=24, help="edge limit for matching enumeration")
    o.add_argument("--half-guard", type=int, default=14,
                   help="edge limit for half-integral enumeration (branch-and-bound beyond it)")
    o.set_defaults(func=cmd_oracle)

    f = sub.add_parser("fptas", help="approximate unequal-division solution")
    f.add_argument("instance")
    f.add_argument("--eps", type=float, default=1e-3, help="target accuracy (default 1e-3)")
    f.add_argument("--kappa", type=float, default=0.5, help="rebalancing damping in (0, 1/2]")
    f.add_argument("--max-iters", type=int, help="iteration guard (default twice the bound)")
    f.add_argument("--out", help="also write the outcome JSON here")
    f.set_defaults(func=cmd_fptas)

    g = sub.add_parser("gen", help="write a generated instance")
    g.add_argument("kind", choices=["chain", "g1", "ring", "bipartite", "random"])
    g.add_argument("--out", required=True, help="instance JSON path")
    g.add_argument("--alpha-out", help="message file path for kinds with a preset start state (chain, ring)")
    g.add_argument("--N", type=int, default=2, help="ring size parameter (8N nodes)")
    g.add_argument("--r", default="1/3", help="ring split fraction in (0, 1/2)")
    g.add_argument("--n", type=int, default=8, help="nodes (random)")
    g.add_argument("--n1", type=int, default=3)
    g.add_argument("--n2", type=int, default=3)
    g.add_argument("--p", type=float, default=0.5, help="edge probability")
    g.add_argument("--max-b", type=int, default=1, help="largest node capacity (random)")
    g.add_argument("--weights", choices=["uniform", "ones", "grid"], default="uniform")
    g.add_argument("--digits", type=int, help="round random weights to this many decimals")
    g.add_argument("--eta", type=float, default=0.0, help="add eta * Uniform[0,1] noise to weights")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"netbargain: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
