"""Command-line entry point: run scenarios, emit trajectory CSV and metrics
JSON (optionally figures), list the catalogue, and run diagnostics.

Override-file grammar (``--config``): one ``key = value`` per line, ``#``
starts a comment.  Scalars are plain numbers, vectors are comma-separated
values in brackets::

    gamma = 0.6
    q_z = [100, 10]
    x0 = [1, 1, -6, -5]

Valid keys: gamma, q_z, duration, control_rate, dt_integrator, x0, v0.
Explicit command-line flags take precedence over the file.

Exit codes: 0 completed and safe, 1 usage error, 2 safety breach,
3 solver failure, 4 validation flags raised.
"""

import argparse
import concurrent.futures
import json
import os
import sys

import numpy as np

from .scenarios import (
    GammaRejected,
    InvalidOverride,
    UnknownScenario,
    catalogue,
    load_scenario,
    self_check,
)
from .sim import compute_metrics, safety_report, simulate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BREACH = 2
EXIT_SOLVER = 3
EXIT_FLAGS = 4

_STATUS_EXIT = {"completed": EXIT_OK, "breached": EXIT_BREACH, "solver_failed": EXIT_SOLVER}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the interface contract wants 1
    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    parser = _Parser(prog="safe-sdre",
                     description="barrier-augmented SDRE scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write CSV/JSON")
    run.add_argument("scenario", nargs="?", help="scenario name (see 'list')")
    run.add_argument("--controller", required=True, choices=("ssdre", "sdre", "cbfqp"))
    run.add_argument("--qz", type=float, nargs="+", metavar="V",
                     help="barrier weight(s); one value per barrier or a single shared value")
    run.add_argument("--gamma", type=float)
    run.add_argument("--duration", type=float, metavar="S")
    run.add_argument("--rate", type=float, metavar="HZ", help="control rate")
    run.add_argument("--dt", type=float, metavar="S", help="integrator step")
    run.add_argument("--out", metavar="DIR",
                     help="output directory (default: $SAFE_SDRE_OUT or '.')")
    run.add_argument("--config", metavar="PATH", help="override file (key = value lines)")
    run.add_argument("--plot", action="store_true", help="also render a summary figure")
    run.add_argument("--seed-check", action="store_true",
                     help="run twice and verify the CSV is byte-identical")
    run.add_argument("--all", action="store_true",
                     help="run every scenario/controller combination for the "
                          "chosen controller-compatible set")
    run.add_argument("--jobs", type=int, default=None,
                     help="worker processes for --all (default: up to 4)")

    sub.add_parser("list", help="list the scenario catalogue")

    val = sub.add_parser("validate", help="run a scenario's structural self-check")
    val.add_argument("scenario")
    return parser


def _parse_config_file(path):
    overrides = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise _UsageError(f"cannot read config file: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise _UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise _UsageError(f"{path}:{lineno}: expected 'key = value'")
        if value.startswith("[") and value.endswith("]"):
            try:
                overrides[key] = [float(tok) for tok in value[1:-1].split(",") if tok.strip()]
            except ValueError as exc:
                raise _UsageError(f"{path}:{lineno}: bad vector literal {value!r}") from exc
        else:
            try:
                overrides[key] = float(value)
            except ValueError as exc:
                raise _UsageError(f"{path}:{lineno}: bad number {value!r}") from exc
    return overrides


def _collect_overrides(args):
    overrides = {}
    if args.config:
        overrides.update(_parse_config_file(args.config))
    if args.qz is not None:
        overrides["q_z"] = args.qz if len(args.qz) > 1 else args.qz[0]
    if args.gamma is not None:
        overrides["gamma"] = args.gamma
    if args.duration is not None:
        overrides["duration"] = args.duration
    if args.rate is not None:
        overrides["control_rate"] = args.rate
    if args.dt is not None:
        overrides["dt_integrator"] = args.dt
    return overrides


def format_csv(log):
    """Render a TrajectoryLog as CSV text (stable schema, 12 significant digits)."""
    n = log.states.shape[1]
    n_d = log.refs.shape[1]
    N = log.barrier_values.shape[1]
    m = log.inputs.shape[1]
    header = (["t"]
              + [f"x{i + 1}" for i in range(n)]
              + [f"v{i + 1}" for i in range(n_d)]
              + [f"z{i + 1}" for i in range(N)]
              + [f"u{i + 1}" for i in range(m)]
              + [f"s_{name}" for name in log.constraint_names]
              + ["err_norm"])
    rows = [",".join(header)]
    data = np.hstack([
        log.times[:, None], log.states, log.refs, log.barrier_values,
        log.inputs, log.constraint_values, log.error_norms[:, None],
    ])
    for row in data:
        rows.append(",".join(f"{val:.12g}" for val in row))
    return "\n".join(rows) + "\n"


def _summary_json(scenario, controller, log, metrics, overrides):
    cfg = scenario.config
    return {
        "scenario": scenario.name,
        "controller": controller,
        "status": log.status,
        "settling_time": metrics.settling_time,
        "J_e": metrics.J_e,
        "J": metrics.J,
        "min_s": metrics.min_s,
        "safety_ok": metrics.safety_ok,
        "wall_time": metrics.wall_time,
        "config": {
            "duration": cfg.duration,
            "dt_integrator": cfg.dt_integrator,
            "control_rate": cfg.control_rate,
            "x0": list(cfg.x0),
            "v0": list(cfg.v0),
            "gamma": scenario.gamma,
            "overrides": {k: (list(v) if isinstance(v, (list, tuple, np.ndarray)) else v)
                          for k, v in overrides.items()},
        },
    }


def _execute_run(name, controller, overrides, out_dir, plot=False, seed_check=False):
    """Simulate one (scenario, controller) pair and write its artifacts.

    Returns (exit_code, summary_line).
    """
    scenario = load_scenario(name, overrides)
    if controller == "cbfqp" and scenario.nominal_law is None:
        raise _UsageError(f"scenario '{name}' supports no cbfqp controller "
                          f"(no nominal law declared)")
    log = simulate(scenario, controller)
    metrics = compute_metrics(log, scenario.settle_threshold, cost_weights=scenario.weights)
    csv_text = format_csv(log)

    if seed_check:
        log2 = simulate(scenario, controller)
        if format_csv(log2) != csv_text:
            return EXIT_SOLVER, f"{name}/{controller}: DETERMINISM CHECK FAILED"

    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, f"{name}_{controller}")
    with open(stem + ".csv", "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    summary = _summary_json(scenario, controller, log, metrics, overrides)
    summary["safety_report"] = safety_report(log)
    with open(stem + ".json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    if plot:
        from .plotting import render_run

        render_run(log, scenario, stem + ".png")

    settle = "none" if metrics.settling_time is None else f"{metrics.settling_time:.3f}s"
    worst = min(metrics.min_s.values())
    line = (f"{name}/{controller}: {log.status}; settling={settle} "
            f"J_e={metrics.J_e:.4g} min_s={worst:.4g} wall={metrics.wall_time:.2f}s")
    if log.fail_reason:
        line += f"  [{log.fail_reason}]"
    if seed_check:
        line += "  [determinism check: ok]"
    return _STATUS_EXIT[log.status], line


def _run_one_job(job):
    name, controller, overrides, out_dir, plot = job
    try:
        return _execute_run(name, controller, overrides, out_dir, plot=plot)
    except (_UsageError, InvalidOverride, GammaRejected, UnknownScenario) as exc:
        return EXIT_USAGE, f"{name}/{controller}: usage error: {exc}"


def _cmd_run(args):
    overrides = _collect_overrides(args)
    out_dir = args.out or os.environ.get("SAFE_SDRE_OUT") or "."

    if args.all:
        jobs = []
        for name in catalogue():
            kinds = ["ssdre", "sdre"]
            if load_scenario(name).nominal_law is not None:
                kinds.append("cbfqp")
            jobs.extend((name, kind, overrides, out_dir, args.plot) for kind in kinds)
        workers = args.jobs or min(4, os.cpu_count() or 1)
        worst = EXIT_OK
        if workers <= 1:
            results = map(_run_one_job, jobs)
        else:
            with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_one_job, jobs))
        for code, line in results:
            print(line)
            worst = max(worst, code)
        return worst

    if not args.scenario:
        raise _UsageError("a scenario name is required unless --all is given")
    code, line = _execute_run(args.scenario, args.controller, overrides, out_dir,
                              plot=args.plot, seed_check=args.seed_check)
    print(line)
    return code


def _cmd_list(_args):
    for name in catalogue():
        scenario = load_scenario(name)
        controllers = "ssdre, sdre" + (", cbfqp" if scenario.nominal_law else "")
        print(f"{name:24s} {scenario.description}  [{controllers}]")
    return EXIT_OK


def _cmd_validate(args):
    scenario = load_scenario(args.scenario)
    report = self_check(scenario)
    print(f"scenario: {report.scenario}")
    print(f"  discount factor bound:    {'ok' if report.gamma_ok else 'FAIL'}")
    print(f"  pointwise stabilizable:   {'ok' if report.stabilizable else 'FAIL'}")
    print(f"  pointwise detectable:     {'ok' if report.detectable else 'FAIL'}")
    print(f"  drift consistency:        {'ok' if report.drift_consistent else 'FAIL'}")
    for name, resid in report.barrier_residuals.items():
        print(f"  barrier '{name}' SDC residual: {resid:.3e}")
    for flag in report.flags:
        print(f"  FLAG: {flag}")
    if report.clean:
        print("  all checks passed")
        return EXIT_OK
    return EXIT_FLAGS


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "list":
            return _cmd_list(args)
        return _cmd_validate(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UnknownScenario, InvalidOverride, GammaRejected) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
