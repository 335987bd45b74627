"""Command line front end.

Exit codes: 0 success (verdicts live in the report), 1 missing config file,
2 invalid config, problem or hypothesis, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ConfigError, load_config
from .criteria import (HypothesisError, classify_trajectory, iterate_certificate,
                       nonoscillation_criterion, oscillation_criterion)
from .problem import ScheduleError
from .regulated import RegulatedFnError
from .reports import (certificate_csv, criterion_csv, dumps, trajectory_csv,
                      trajectory_json, write_atomic)
from .solver import ProblemError, QuadratureFailure, residual, solve
from .stieltjes import integrate

EXIT_OK, EXIT_MISSING, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


def _threads():
    """Worker cap from ``MDDE_THREADS``; the kernels are vectorised and run
    single-threaded, so this only validates the setting."""
    raw = os.environ.get("MDDE_THREADS")
    if raw is None:
        return 1
    n = int(raw)
    if n < 1:
        raise ValueError
    return n


def build_parser():
    ap = argparse.ArgumentParser(prog="mdde", description="Impulsive measure delay equations: "
                                 "solver, oscillation tests and fixed-point certificates.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="problem config (JSON)")
        p.add_argument("--tol", type=float, help="override run.tol")

    p = sub.add_parser("solve", help="solve by the method of steps")
    common(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--horizon", type=float, help="override run.horizon")
    p.add_argument("--samples", type=int, help="override run.samples_per_step")

    p = sub.add_parser("check", help="run an oscillation test or the certificate")
    common(p)
    p.add_argument("--mode", required=True,
                   choices=["oscillation", "nonoscillation", "certificate"])
    p.add_argument("--out", help="output directory")
    p.add_argument("--horizon", type=float, help="override run.horizon")

    p = sub.add_parser("quad", help="print int_a^b p dg")
    common(p)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    return ap


def _out_path(cfg, args, suffix):
    folder = args.out if getattr(args, "out", None) else cfg.out_dir
    return os.path.join(folder, f"{cfg.prefix}_{suffix}")


def cmd_solve(cfg, args):
    run = cfg.run
    horizon = args.horizon if args.horizon is not None else run.horizon
    tol = args.tol if args.tol is not None else run.tol
    samples = args.samples if args.samples is not None else run.samples_per_step
    traj = solve(cfg.problem, horizon, samples, tol)
    res = residual(cfg.problem, traj, run.probes, run.seed, tol)
    verdict = classify_trajectory(traj, run.tail_fraction)
    extra = {"residual": res, "classification": verdict.value}
    jpath = _out_path(cfg, args, "trajectory.json")
    write_atomic(jpath, trajectory_json(traj, extra))
    write_atomic(_out_path(cfg, args, "trajectory.csv"), trajectory_csv(traj))
    print(f"solved to t={traj.horizon:g}: {traj.t.size} samples, residual {res:.3g}, "
          f"tail {verdict.value}; wrote {jpath}")
    return EXIT_OK


def cmd_check(cfg, args):
    run = cfg.run
    horizon = args.horizon if args.horizon is not None else run.horizon
    tol = args.tol if args.tol is not None else run.tol
    prob = cfg.problem
    if args.mode == "certificate":
        cert = iterate_certificate(prob, run.T, horizon, run.kmax, tol, run.cells_per_delay)
        d = cert.to_dict()
        d["kind"] = "certificate"
        d["conclusion"] = "NonoscillatoryCertified" if cert.converged else "Inconclusive"
        path = _out_path(cfg, args, "certificate.json")
        write_atomic(path, dumps(d))
        write_atomic(_out_path(cfg, args, "certificate.csv"), certificate_csv(cert))
        print(f"certificate: {cert.status} after {cert.iterations} iterates, "
              f"sup gap {cert.sup_gap:.3g}, valid from t={cert.valid_from:g}; wrote {path}")
        return EXIT_OK
    fn = oscillation_criterion if args.mode == "oscillation" else nonoscillation_criterion
    rep = fn(prob, run.T, horizon, run.stride, tol)
    path = _out_path(cfg, args, f"{args.mode}.json")
    write_atomic(path, dumps(rep.to_dict()))
    write_atomic(_out_path(cfg, args, f"{args.mode}.csv"), criterion_csv(rep))
    print(f"{args.mode}: {rep.verdict.value} (sup F = {rep.sup_observed:.12g} at "
          f"t={rep.argsup:g}, threshold {rep.threshold:.6g}, horizon {rep.horizon:g}); wrote {path}")
    return EXIT_OK


def cmd_quad(cfg, args):
    prob = cfg.problem
    tol = args.tol if args.tol is not None else cfg.run.tol
    r = integrate(prob.p, prob.g, args.a, args.b, tol)
    print(dumps({"kind": "quad", "a": args.a, "b": args.b, **r.to_dict()}), end="")
    return EXIT_OK if r.converged else EXIT_NUMERIC


COMMANDS = {"solve": cmd_solve, "check": cmd_check, "quad": cmd_quad}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _threads()
    except ValueError:
        print("error: MDDE_THREADS must be a positive integer", file=sys.stderr)
        return EXIT_INVALID
    try:
        cfg = load_config(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_MISSING
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](cfg, args)
    except ProblemError as exc:
        print(f"error: invalid problem: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except HypothesisError as exc:
        print(f"error: hypothesis violated: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ScheduleError, RegulatedFnError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (QuadratureFailure, ArithmeticError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
