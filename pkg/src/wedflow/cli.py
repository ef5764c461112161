"""Command-line front end: ``wedflow solve|sweep|accept --config FILE``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .acceptance import TITLES, AcceptanceSuite, decreasing
from .config import RunConfig, build_problem, exact_solution
from .errors import ConfigInvalid, WedflowError
from .fixed_point import solve_regularized
from .output import to_json, trajectory_csv, write_atomic
from .sweeps import causal_limit_sweep, lambda_sweep, reference_trajectory
from .wed import energy_inequality_slack


def _load(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        return RunConfig.load(path)
    except OSError as exc:
        raise ConfigInvalid(f"config: cannot read {path}: {exc.strerror}") from exc


def cmd_solve(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    t0 = time.perf_counter()
    problem = build_problem(cfg)
    rep = solve_regularized(problem, cfg.fixed_point())
    slack, scale = energy_inequality_slack(problem, rep.solution)
    last = rep.last
    diagnostics = {
        "el_residual": last.el_residual,
        "final_xi_norm": last.final_xi_norm,
        "terminal_xi": last.terminal_xi,
        "energy_slack": slack,
        "energy_scale": scale,
        "iterations": int(sum(r.iterations for r in rep.inner_reports)),
        "outer_iters": rep.outer_iters,
        "converged": rep.converged,
        "functional_value": last.functional_value,
        "wall_time_s": time.perf_counter() - t0,
    }
    os.makedirs(cfg.output_dir, exist_ok=True)
    write_atomic(os.path.join(cfg.output_dir, "trajectory.csv"), trajectory_csv(problem.space, rep.solution))
    write_atomic(os.path.join(cfg.output_dir, "diagnostics.json"), to_json(diagnostics))
    print(f"solved: el_residual={last.el_residual:.3e} outer_iters={rep.outer_iters} -> {cfg.output_dir}", file=out)
    return 0


def cmd_sweep(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    t0 = time.perf_counter()
    problem = build_problem(cfg)
    plan = cfg.sweep_plan()
    reference = exact_solution(cfg) if cfg.sweep_reference == "exact" else None
    if cfg.sweep_reference == "exact" and reference is None:
        raise ConfigInvalid("sweep_reference: no closed form is known for this problem")
    fp = cfg.fixed_point()
    if cfg.sweep_kind == "lambda":
        if not plan.lambdas:
            raise ConfigInvalid("sweep_lambdas: a lambda sweep needs at least one value")
        table = lambda_sweep(problem, plan, fp, reference=reference)
    else:
        if reference is None:
            reference = reference_trajectory(problem)
        table = causal_limit_sweep(problem, plan, fp, reference=reference)
    lines = []
    for name in ("sup_error", "residual", "increment"):
        col = table.column(name)
        col = col[np.isfinite(col)]
        if len(col) > 1:
            lines.append(f"{name}: {'monotone' if decreasing(col) else 'NOT monotone'} (5% slack)")
    diverged = [r.epsilon for r in table.rows if r.diverged]
    lines.append(f"diverged rows: {len(diverged)}")
    summary = "\n".join(lines) + "\n"
    os.makedirs(cfg.output_dir, exist_ok=True)
    write_atomic(os.path.join(cfg.output_dir, "sweep.csv"), table.to_csv())
    write_atomic(os.path.join(cfg.output_dir, "sweep_summary.txt"), summary)
    timing = {"wall_time_s": time.perf_counter() - t0,
              "rows": [{"epsilon": r.epsilon, "lambda": r.lam, "wall_ms": r.wall_ms} for r in table.rows]}
    write_atomic(os.path.join(cfg.output_dir, "sweep_timing.json"), to_json(timing))
    out.write(table.to_csv())
    out.write(summary)
    return 0


def cmd_accept(cfg: RunConfig, list_only=False, out=None) -> int:
    out = out or sys.stdout
    if list_only:
        for n, title in TITLES.items():
            print(f"criterion {n:2d}: {title}", file=out)
        return 0
    suite = AcceptanceSuite(cfg)
    results = suite.run(on_result=lambda r: print(r.line(), file=out, flush=True))
    os.makedirs(cfg.output_dir, exist_ok=True)
    for name, text in sorted(suite.artefacts.items()):
        write_atomic(os.path.join(cfg.output_dir, name), text)
    write_atomic(os.path.join(cfg.output_dir, "acceptance.csv"), suite.summary_csv())
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed", file=out)
    return 0 if passed == len(results) else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="wedflow", description="Weighted energy-dissipation solver")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("solve", "single regularised solve"), ("sweep", "epsilon or lambda sweep"),
                           ("accept", "run the acceptance suite")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON config file (defaults apply when omitted)")
        if name == "accept":
            p.add_argument("--list", action="store_true", help="list criteria without running them")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args.config)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        return cmd_accept(cfg, list_only=args.list)
    except WedflowError as exc:
        print(json.dumps({"error": exc.kind, "message": str(exc)}), file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(json.dumps({"error": ConfigInvalid.kind, "message": str(exc)}), file=sys.stderr)
        return ConfigInvalid.exit_code


if __name__ == "__main__":
    sys.exit(main())
