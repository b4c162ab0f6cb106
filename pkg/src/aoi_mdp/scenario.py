"""Scenario configuration and parameter sweeps.

A scenario file is flat TOML::

    q = 4
    delta_max = 10
    r_max = 4
    g_max_cost = 100
    gamma = 0.99
    p_s = 0.8                      # number or list
    p_a = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    policies = ["optimal", "zero_wait", "max_sampling", "never_sample"]
    out = "results/basic"
    monte_carlo = false
    mc_runs = 10000
    seed = 0

Grid points are visited with ``p_s`` as the outer and ``p_a`` as the inner
loop; rows are always written in that order.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .analysis import (
    STEADY_TOL,
    AnalysisError,
    expensive_channel_probability,
    induce_chain,
    recurrent_class,
    steady_state,
)
from .kernel import KernelError, build_kernel
from .model import ModelError, ModelParams, StateSpace
from .simulator import estimate_discounted_cost
from .solver import (
    HEURISTICS,
    ConvergenceError,
    evaluate_policy,
    heuristic_policy,
    optimistic_policy_iteration,
    policy_residual,
)

log = logging.getLogger(__name__)

POLICIES = ("optimal",) + HEURISTICS
CSV_HEADER = (
    "p_a", "p_s", "q", "delta_max", "r_max", "g_max", "gamma",
    "policy", "j_x0", "pi_e", "residual", "states", "solve_ms",
)
MC_HEADER = ("p_a", "p_s", "policy", "j_x0", "mc_mean", "mc_half_width_99", "mc_runs", "within_ci")

_PARAM_KEYS = ("q", "delta_max", "r_max", "g_max_cost", "gamma", "eps_ape", "eps_residual")
_KNOWN_KEYS = set(_PARAM_KEYS) | {
    "p_a", "p_s", "policies", "out", "format", "monte_carlo", "mc_runs", "seed",
}


class ConfigError(ValueError):
    pass


class GridPointError(RuntimeError):
    """A solver or analysis failure, tagged with the grid point that caused it."""


def fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


@dataclass
class Scenario:
    base: ModelParams
    p_a: list[float]
    p_s: list[float]
    policies: list[str] = field(default_factory=lambda: list(POLICIES))
    out: str = "results"
    format: str = "csv"
    monte_carlo: bool = False
    mc_runs: int = 10_000
    seed: int = 0

    def grid(self) -> list[ModelParams]:
        return [dataclasses.replace(self.base, p_a=pa, p_s=ps) for ps in self.p_s for pa in self.p_a]


def _line_of(text: str, key: str) -> int | None:
    for n, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*{re.escape(key)}\s*=", line):
            return n
    return None


def parse_config(text: str, source: str = "<config>") -> Scenario:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    def fail(key, message):
        line = _line_of(text, key)
        where = f"{source}:{line}" if line else source
        raise ConfigError(f"{where}: field '{key}': {message}")

    for key in raw:
        if key not in _KNOWN_KEYS:
            fail(key, "unknown field")

    def number_list(key, default):
        value = raw.get(key, default)
        values = value if isinstance(value, list) else [value]
        if not values:
            fail(key, "empty list")
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                fail(key, f"expected a number or list of numbers, got {v!r}")
            if not 0.0 <= v <= 1.0:
                fail(key, f"probability {v} outside [0, 1]")
        return [float(v) for v in values]

    p_a = number_list("p_a", 0.0)
    p_s = number_list("p_s", 0.8)

    kwargs = {}
    for key in _PARAM_KEYS:
        if key in raw:
            value = raw[key]
            if key in ("q", "delta_max", "r_max") and (isinstance(value, bool) or not isinstance(value, int)):
                fail(key, f"expected an integer, got {value!r}")
            if key not in ("q", "delta_max", "r_max"):
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    fail(key, f"expected a number, got {value!r}")
                value = float(value)
            kwargs[key] = value
    try:
        base = ModelParams(p_a=p_a[0], p_s=p_s[0], **kwargs)
    except ModelError as exc:
        # ModelError messages start with the offending field name
        fail(str(exc).split()[0], str(exc))

    policies = raw.get("policies", list(POLICIES))
    if isinstance(policies, str):
        policies = [p.strip() for p in policies.split(",")]
    if not isinstance(policies, list) or not policies:
        fail("policies", "expected a non-empty list")
    for name in policies:
        if name not in POLICIES:
            fail("policies", f"unknown policy {name!r}; expected a subset of {list(POLICIES)}")

    fmt_ = raw.get("format", "csv")
    if fmt_ != "csv":
        fail("format", f"only 'csv' is supported, got {fmt_!r}")
    mc_runs = raw.get("mc_runs", 10_000)
    if isinstance(mc_runs, bool) or not isinstance(mc_runs, int) or mc_runs < 2:
        fail("mc_runs", "expected an integer >= 2")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        fail("seed", "expected an unsigned 64-bit integer")
    monte_carlo = raw.get("monte_carlo", False)
    if not isinstance(monte_carlo, bool):
        fail("monte_carlo", "expected true or false")

    return Scenario(
        base=base, p_a=p_a, p_s=p_s, policies=list(policies), out=str(raw.get("out", "results")),
        format=fmt_, monte_carlo=monte_carlo, mc_runs=mc_runs, seed=seed,
    )


def load_config(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    return parse_config(text, str(path))


@lru_cache(maxsize=8)
def _space(q: int, delta_max: int, r_max: int) -> StateSpace:
    return StateSpace(ModelParams(q=q, delta_max=delta_max, r_max=r_max, g_max_cost=delta_max + 1.0))


def state_space(params: ModelParams) -> StateSpace:
    """Reachable states for ``params``; enumeration is shared across probabilities and costs."""
    shared = _space(params.q, params.delta_max, params.r_max)
    return StateSpace(params, shared.states)


@dataclass
class PointResult:
    params: ModelParams
    rows: list[dict]
    mc_rows: list[dict]
    policies: dict = field(default_factory=dict, repr=False)


def solve_point(params: ModelParams, policies, monte_carlo=False, mc_runs=10_000, seed=0,
                keep_policies=False) -> PointResult:
    """Construct, evaluate and analyse every requested policy at one grid point."""
    tag = f"p_a={params.p_a:g}, p_s={params.p_s:g}, q={params.q}, delta_max={params.delta_max}"
    try:
        space = state_space(params)
        kernel = build_kernel(space, params)
        x0 = space.initial_index
        rows, mc_rows, built = [], [], {}
        for name in policies:
            start = time.perf_counter()
            if name == "optimal":
                result = optimistic_policy_iteration(kernel, params)
                policy, values, residual = result.policy, result.values, result.residual
            else:
                policy = heuristic_policy(name, space, params)
                values = evaluate_policy(policy, kernel, params)
                residual = policy_residual(policy, values, kernel, params)
            solve_ms = (time.perf_counter() - start) * 1000.0

            chain = induce_chain(policy, kernel)
            pi = steady_state(chain, recurrent_class(chain))
            pi_e = expensive_channel_probability(pi, space)
            if name == "never_sample" and abs(pi_e - 1.0 / params.delta_max) > 1e-9:
                raise GridPointError(f"never-sample expensive-channel share {pi_e} != 1/delta_max")

            rows.append({
                "p_a": params.p_a, "p_s": params.p_s, "q": params.q, "delta_max": params.delta_max,
                "r_max": params.r_max, "g_max": params.g_max_cost, "gamma": params.gamma,
                "policy": name, "j_x0": float(values[x0]), "pi_e": pi_e, "residual": residual,
                "states": len(space), "solve_ms": solve_ms,
            })
            if monte_carlo:
                mean, half = estimate_discounted_cost(policy, params, seed, mc_runs)
                mc_rows.append({
                    "p_a": params.p_a, "p_s": params.p_s, "policy": name, "j_x0": float(values[x0]),
                    "mc_mean": mean, "mc_half_width_99": half, "mc_runs": mc_runs,
                    "within_ci": int(abs(mean - values[x0]) <= half + params.eps_ape),
                })
            if keep_policies:
                built[name] = (policy, values)
            log.info("%s %s: J(x0)=%.6f pi_e=%.6f", tag, name, values[x0], pi_e)
    except GridPointError as exc:
        raise GridPointError(f"grid point {tag}: {exc}") from exc
    except (ConvergenceError, AnalysisError, KernelError) as exc:
        raise GridPointError(f"grid point {tag}: {exc}") from exc
    return PointResult(params, rows, mc_rows, built)


def _solve_job(args):
    return solve_point(*args)


def run_grid(points, policies, monte_carlo=False, mc_runs=10_000, seed=0, jobs=1) -> list[PointResult]:
    """Solve every grid point; results come back in grid order whatever ``jobs`` is."""
    jobs_args = [(p, tuple(policies), monte_carlo, mc_runs, seed) for p in points]
    if jobs <= 1 or len(points) <= 1:
        return [_solve_job(a) for a in jobs_args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_solve_job, jobs_args))


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(row[h]) for h in header])
    path.write_text(buf.getvalue())
    return path


def write_manifest(path, scenario: Scenario, extra=None) -> Path:
    manifest = {
        "package_version": __version__,
        "base_params": dataclasses.asdict(scenario.base),
        "grid": {"p_a": scenario.p_a, "p_s": scenario.p_s, "order": "p_s outer, p_a inner"},
        "policies": scenario.policies,
        "tolerances": {
            "eps_ape": scenario.base.eps_ape,
            "eps_residual": scenario.base.eps_residual,
            "steady_state_residual": STEADY_TOL,
        },
        "monte_carlo": {"enabled": scenario.monte_carlo, "runs": scenario.mc_runs,
                        "base_seed": scenario.seed, "rng": "splitmix64"},
    }
    if extra:
        manifest.update(extra)
    path = Path(path)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def run_scenario(scenario: Scenario, out_dir=None, jobs=1, name="results") -> dict:
    """Run the full sweep and write ``<name>.csv`` and ``<name>.manifest.json``.

    With Monte Carlo enabled a ``<name>.monte_carlo.csv`` is written as well.
    Returns the paths written and the result rows.
    """
    out = Path(out_dir or scenario.out)
    out.mkdir(parents=True, exist_ok=True)
    results = run_grid(scenario.grid(), scenario.policies, scenario.monte_carlo,
                       scenario.mc_runs, scenario.seed, jobs)
    rows = [r for res in results for r in res.rows]
    written = {"csv": write_csv(out / f"{name}.csv", CSV_HEADER, rows)}
    if scenario.monte_carlo:
        mc_rows = [r for res in results for r in res.mc_rows]
        written["monte_carlo"] = write_csv(out / f"{name}.monte_carlo.csv", MC_HEADER, mc_rows)
    written["manifest"] = write_manifest(out / f"{name}.manifest.json", scenario,
                                         {"rows": len(rows), "csv": written["csv"].name})
    written["rows"] = rows
    return written
