"""Command-line entry point: ``aoi-mdp <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from .kernel import build_kernel
from .model import ModelParams
from .policy_io import PolicyFileError, export_policy, import_policy
from .reproduce import FIGURES, gnuplot_script, reproduce
from .scenario import (
    POLICIES,
    ConfigError,
    GridPointError,
    Scenario,
    fmt,
    load_config,
    run_grid,
    run_scenario,
    state_space,
    write_csv,
)
from .simulator import estimate_discounted_cost, simulate
from .solver import ConvergenceError, evaluate_policy, heuristic_policy, optimistic_policy_iteration

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3

log = logging.getLogger("aoi_mdp")


def _setup_logging():
    level = os.environ.get("AOI_MDP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _policies(text):
    names = [p.strip() for p in text.split(",") if p.strip()]
    for name in names:
        if name not in POLICIES:
            raise ConfigError(f"--policies: unknown policy {name!r}; expected a subset of {list(POLICIES)}")
    return names


def _scenario(args) -> Scenario:
    if args.config:
        scen = load_config(args.config)
    else:
        scen = Scenario(ModelParams(), [0.0], [0.8])
    if getattr(args, "policies", None):
        scen.policies = _policies(args.policies)
    if getattr(args, "seed", None) is not None:
        scen.seed = args.seed
    if getattr(args, "format", "csv") != "csv":
        raise ConfigError(f"--format: only 'csv' is supported, got {args.format!r}")
    return scen


def _single_point(scen: Scenario, command: str) -> ModelParams:
    grid = scen.grid()
    if len(grid) != 1:
        raise ConfigError(f"{command} needs a single (p_a, p_s) point, the config defines {len(grid)}")
    return grid[0]


def _emit(rows, header, out_path=None):
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(row[h]) for h in header])
    if out_path:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        write_csv(out_path, header, rows)


def cmd_solve(args):
    scen = _scenario(args)
    out = Path(args.out or scen.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for params in scen.grid():
        space = state_space(params)
        kernel = build_kernel(space, params)
        try:
            result = optimistic_policy_iteration(kernel, params)
        except ConvergenceError as exc:
            raise GridPointError(f"grid point p_a={params.p_a:g}, p_s={params.p_s:g}: {exc}") from exc
        path = export_policy(result.policy, out / f"policy_pa{params.p_a:g}_ps{params.p_s:g}.json", params)
        rows.append({"p_a": params.p_a, "p_s": params.p_s, "j_x0": float(result.values[space.initial_index]),
                     "residual": result.residual, "rounds": result.rounds, "file": path.name})
    _emit(rows, ("p_a", "p_s", "j_x0", "residual", "rounds", "file"))


def cmd_evaluate(args):
    scen = _scenario(args)
    if args.policy_file:
        params = _single_point(scen, "evaluate --policy-file")
        policy = import_policy(args.policy_file, params)
        kernel = build_kernel(policy.space, params)
        values = evaluate_policy(policy, kernel, params)
        _emit([{"p_a": params.p_a, "p_s": params.p_s, "policy": Path(args.policy_file).name,
                "j_x0": float(values[policy.space.initial_index])}], ("p_a", "p_s", "policy", "j_x0"))
        return
    results = run_grid(scen.grid(), scen.policies, jobs=args.jobs)
    rows = [r for res in results for r in res.rows]
    _emit(rows, ("p_a", "p_s", "policy", "j_x0", "residual", "states"),
          Path(args.out) / "evaluate.csv" if args.out else None)


def cmd_steady_state(args):
    scen = _scenario(args)
    results = run_grid(scen.grid(), scen.policies, jobs=args.jobs)
    rows = [r for res in results for r in res.rows]
    _emit(rows, ("p_a", "p_s", "policy", "pi_e"), Path(args.out) / "steady_state.csv" if args.out else None)


def cmd_simulate(args):
    scen = _scenario(args)
    params = _single_point(scen, "simulate")
    space = state_space(params)
    if args.policy_file:
        policy = import_policy(args.policy_file, params, space)
    elif args.policy == "optimal":
        policy = optimistic_policy_iteration(build_kernel(space, params), params).policy
    else:
        policy = heuristic_policy(args.policy, space, params)

    if args.runs:
        mean, half = estimate_discounted_cost(policy, params, scen.seed, args.runs)
        _emit([{"policy": args.policy, "runs": args.runs, "seed": scen.seed, "mc_mean": mean,
                "mc_half_width_99": half}], ("policy", "runs", "seed", "mc_mean", "mc_half_width_99"))
        return
    traj = simulate(policy, params, scen.seed, args.horizon)
    header = ("k", "delta", "r", *[f"a{q}" for q in range(1, params.q + 1)],
              "u_s", "u_d", "u_p", "w_a", "w_s", "cost")
    rows = []
    for step in traj.records:
        values = (step.k, *step.state.vector(), *step.control, *step.disturbance, step.cost)
        rows.append(dict(zip(header, values)))
    _emit(rows, header, Path(args.out) / "trajectory.csv" if args.out else None)


def cmd_sweep(args):
    scen = _scenario(args)
    if args.monte_carlo:
        scen.monte_carlo = True
    written = run_scenario(scen, args.out, jobs=args.jobs)
    if args.plot:
        out = written["csv"].parent
        (out / "results.gp").write_text(
            gnuplot_script("results", written["csv"].name, "j_x0", "J(x0)", scen.policies, scen.p_s)
        )
    print(f"wrote {len(written['rows'])} rows to {written['csv']}")


def cmd_reproduce(args):
    out = Path(args.out or "results") / args.figure
    checks = reproduce(args.figure, out, jobs=args.jobs, plot=args.plot)
    for check in checks:
        print(check.line())
    print(f"data written to {out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aoi-mdp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, policies=True):
        p.add_argument("--config", help="scenario file (flat TOML); defaults to the basic scenario")
        p.add_argument("--out", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="grid points solved in parallel")
        p.add_argument("--seed", type=int, help="base seed for Monte Carlo runs")
        p.add_argument("--format", default="csv", help="output format (csv)")
        if policies:
            p.add_argument("--policies", help="comma-separated subset of " + ",".join(POLICIES))

    p = sub.add_parser("solve", help="compute optimal policies and export them")
    common(p, policies=False)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="discounted cost J(x0) of each policy")
    common(p)
    p.add_argument("--policy-file", help="evaluate an exported policy instead")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("steady-state", help="expensive-channel share pi_e of each policy")
    common(p)
    p.set_defaults(func=cmd_steady_state)

    p = sub.add_parser("simulate", help="simulate one trajectory or estimate J(x0) by Monte Carlo")
    common(p, policies=False)
    p.add_argument("--policy", default="never_sample", choices=POLICIES)
    p.add_argument("--policy-file", help="simulate an exported policy")
    p.add_argument("--horizon", type=int, default=100)
    p.add_argument("--runs", type=int, help="estimate J(x0) from this many runs instead")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a scenario grid and write CSV plus manifest")
    common(p)
    p.add_argument("--monte-carlo", action="store_true", help="add the Monte Carlo cross-check")
    p.add_argument("--plot", action="store_true", help="also write a gnuplot script")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce", help="regenerate a figure data set and check its trends")
    p.add_argument("figure", choices=FIGURES)
    p.add_argument("--out", help="output directory (a subdirectory per figure is created)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ConfigError, PolicyFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GridPointError, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
