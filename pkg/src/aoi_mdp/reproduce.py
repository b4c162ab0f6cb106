"""Presets regenerating the figure data sets, with trend checks on the results."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .model import ModelParams, StateSpace
from .scenario import CSV_HEADER, POLICIES, Scenario, run_grid, write_csv, write_manifest
from .simulator import simulate
from .solver import heuristic_policy

PA_GRID = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
PS_GRID = [0.8, 0.6, 0.4, 0.2]
CONTROLLED = ("optimal", "zero_wait", "max_sampling")
MARGIN = 1e-3
FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7")


@dataclass
class Check:
    label: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.label}" + (f" ({self.detail})" if self.detail else "")


def scenarios(figure: str) -> list[Scenario]:
    basic = ModelParams()
    costly = ModelParams(g_max_cost=1000.0)
    if figure in ("fig3", "fig4"):
        return [Scenario(basic, PA_GRID, PS_GRID, list(POLICIES))]
    if figure == "fig5":
        return [Scenario(costly, PA_GRID, [0.8], list(POLICIES))]
    if figure == "fig6":
        return [Scenario(ModelParams(q=q, g_max_cost=1000.0), [0.4], [0.8], list(CONTROLLED)) for q in (4, 8)]
    if figure == "fig7":
        return [
            Scenario(ModelParams(delta_max=d, g_max_cost=1000.0), [0.4], [0.8], list(CONTROLLED))
            for d in (10, 20)
        ]
    raise KeyError(figure)


def _pick(rows, **match):
    return [r for r in rows if all(r[k] == v for k, v in match.items())]


def _j(rows, **match) -> float:
    found = _pick(rows, **match)
    if len(found) != 1:
        raise KeyError(f"expected one row for {match}, found {len(found)}")
    return found[0]["j_x0"]


def check_fig3(rows) -> list[Check]:
    checks = []
    for pa in (0.0, 0.2):
        js, jz = _j(rows, p_s=0.8, p_a=pa, policy="optimal"), _j(rows, p_s=0.8, p_a=pa, policy="zero_wait")
        gap = (jz - js) / js
        checks.append(Check(f"zero-wait within 5% of optimal at p_a={pa}", gap <= 0.05, f"gap {gap:.4f}"))
        jm = _j(rows, p_s=0.8, p_a=pa, policy="max_sampling")
        checks.append(Check(f"max-sampling worse than zero-wait at p_a={pa}", jm > jz + MARGIN,
                            f"{jm:.3f} vs {jz:.3f}"))
    for pa in (0.6, 0.8):
        jm, jz = _j(rows, p_s=0.8, p_a=pa, policy="max_sampling"), _j(rows, p_s=0.8, p_a=pa, policy="zero_wait")
        checks.append(Check(f"max-sampling better than zero-wait at p_a={pa}", jm < jz - MARGIN,
                            f"{jm:.3f} vs {jz:.3f}"))
    for pa in (0.0, 0.2, 0.4):
        jn = _j(rows, p_s=0.8, p_a=pa, policy="never_sample")
        worst = max(_j(rows, p_s=0.8, p_a=pa, policy=p) for p in CONTROLLED)
        checks.append(Check(f"controlled policies beat never-sample at p_a={pa}", worst < jn - MARGIN,
                            f"worst {worst:.3f} vs {jn:.3f}"))
    checks.extend(check_monotone(rows))
    checks.extend(check_never_sample_flat(rows))
    return checks


def check_monotone(rows, slack=1e-6) -> list[Check]:
    opt = _pick(rows, policy="optimal")
    ps_values = sorted({r["p_s"] for r in opt})
    pa_values = sorted({r["p_a"] for r in opt})
    bad_pa = [
        (ps, a, b) for ps in ps_values for a, b in zip(pa_values, pa_values[1:])
        if _j(opt, p_s=ps, p_a=b) < _j(opt, p_s=ps, p_a=a) - slack
    ]
    bad_ps = [
        (pa, a, b) for pa in pa_values for a, b in zip(ps_values, ps_values[1:])
        if _j(opt, p_s=b, p_a=pa) > _j(opt, p_s=a, p_a=pa) + slack
    ]
    return [
        Check("optimal J(x0) nondecreasing in p_a", not bad_pa, f"violations {bad_pa}" if bad_pa else ""),
        Check("optimal J(x0) nonincreasing in p_s", not bad_ps, f"violations {bad_ps}" if bad_ps else ""),
    ]


def check_never_sample_flat(rows, tol=1e-9) -> list[Check]:
    checks = []
    never = _pick(rows, policy="never_sample")
    for ps in sorted({r["p_s"] for r in never}):
        values = [r["j_x0"] for r in _pick(never, p_s=ps)]
        spread = max(values) - min(values)
        checks.append(Check(f"never-sample J(x0) flat in p_a at p_s={ps}", spread <= tol, f"spread {spread:.2e}"))
    return checks


def check_fig4(rows) -> list[Check]:
    checks = []
    over = [r for r in rows if r["pi_e"] > 1.0 / r["delta_max"] + 1e-9]
    checks.append(Check("no policy uses the expensive channel more than 1/delta_max", not over))
    never = _pick(rows, policy="never_sample")
    checks.append(Check("never-sample pi_e equals 1/delta_max",
                        all(abs(r["pi_e"] - 1.0 / r["delta_max"]) <= 1e-9 for r in never)))
    opt = _pick(rows, policy="optimal")
    ps_values = sorted({r["p_s"] for r in opt})
    pa_values = sorted({r["p_a"] for r in opt})

    def pie(ps, pa):
        return _pick(opt, p_s=ps, p_a=pa)[0]["pi_e"]

    up = all(pie(ps, b) >= pie(ps, a) - 1e-9 for ps in ps_values for a, b in zip(pa_values, pa_values[1:]))
    down = all(pie(b, pa) <= pie(a, pa) + 1e-9 for pa in pa_values for a, b in zip(ps_values, ps_values[1:]))
    checks.append(Check("optimal pi_e nondecreasing in p_a", up))
    checks.append(Check("optimal pi_e nonincreasing in p_s", down))
    return checks


def check_fig5(rows) -> list[Check]:
    checks = check_never_sample_flat(rows)
    dominated = all(
        _j(rows, p_a=r["p_a"], p_s=r["p_s"], policy="optimal") <= r["j_x0"] + 1e-3 for r in rows
    )
    checks.append(Check("optimal policy dominates every heuristic", dominated))
    return checks


def check_fig6(rows, certificate) -> list[Check]:
    small, large = _pick(rows, q=4), _pick(rows, q=8)
    jz4, jz8 = _j(small, policy="zero_wait"), _j(large, policy="zero_wait")
    checks = [Check("zero-wait J(x0) unchanged when Q doubles", abs(jz8 - jz4) <= 2 * certificate,
                    f"{jz4:.6f} -> {jz8:.6f}")]
    for name in ("max_sampling", "optimal"):
        a, b = _j(small, policy=name), _j(large, policy=name)
        checks.append(Check(f"{name} J(x0) increases when Q doubles", b > a, f"{a:.3f} -> {b:.3f}"))
    return checks


def check_fig7(rows) -> list[Check]:
    checks = []
    for name in CONTROLLED:
        a, b = _j(rows, delta_max=10, policy=name), _j(rows, delta_max=20, policy=name)
        checks.append(Check(f"{name} J(x0) decreases when delta_max doubles", b < a, f"{a:.3f} -> {b:.3f}"))
    return checks


def never_sample_trace(horizon=60, delta_max=10, g_max_cost=20.0, seed=0):
    params = ModelParams(delta_max=delta_max, g_max_cost=g_max_cost, p_a=0.0)
    policy = heuristic_policy("never_sample", StateSpace(params), params)
    traj = simulate(policy, params, seed, horizon)
    return params, [
        {"k": step.k, "delta": step.state.delta, "cost": step.cost} for step in traj.records
    ]


def check_fig2(params, rows) -> list[Check]:
    d = params.delta_max
    deltas = [r["delta"] for r in rows[1:]]
    expected = [(k % d) + 1 for k in range(len(deltas))]
    costs_ok = all(
        r["cost"] == (params.g_max_cost if r["delta"] == d else nxt["delta"])
        for r, nxt in zip(rows, rows[1:])
    )
    periods = len(deltas) // d
    return [
        Check(f"AoI cycles 1..{d} over {periods} periods", deltas == expected),
        Check("cost is G at delta_max and the next AoI elsewhere", costs_ok),
    ]


GNUPLOT = """# gnuplot -p {name}.gp
set datafile separator ","
set key outside
set xlabel "{xlabel}"
set ylabel "{ylabel}"
{plots}
"""


def gnuplot_script(name, csv_name, column, ylabel, policies, p_s_values) -> str:
    col = CSV_HEADER.index(column) + 1
    pol_col = CSV_HEADER.index("policy") + 1
    ps_col = CSV_HEADER.index("p_s") + 1
    pieces = []
    for ps in p_s_values:
        series = ", ".join(
            f"'{csv_name}' using 1:(strcol({pol_col}) eq '{p}' && ${ps_col} == {ps} ? ${col} : 1/0) "
            f"with linespoints title '{p}'"
            for p in policies
        )
        pieces.append(f"set title 'p_s = {ps}'\nplot {series}")
    return GNUPLOT.format(name=name, xlabel="p_a", ylabel=ylabel, plots="\n".join(pieces))


def reproduce(figure: str, out_dir, jobs=1, plot=False) -> list[Check]:
    """Write the data set for ``figure`` into ``out_dir`` and return its trend checks."""
    if figure not in FIGURES:
        raise KeyError(f"unknown figure {figure!r}; expected one of {FIGURES}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if figure == "fig2":
        params, rows = never_sample_trace()
        write_csv(out / "fig2.csv", ("k", "delta", "cost"), rows)
        if plot:
            (out / "fig2.gp").write_text(
                'set datafile separator ","\nplot "fig2.csv" using 1:2 with steps title "AoI", '
                '"fig2.csv" using 1:3 with impulses title "cost"\n'
            )
        return check_fig2(params, rows)

    rows = []
    parts = scenarios(figure)
    for scen in parts:
        results = run_grid(scen.grid(), scen.policies, jobs=jobs)
        rows.extend(r for res in results for r in res.rows)
    write_csv(out / f"{figure}.csv", CSV_HEADER, rows)
    write_manifest(out / f"{figure}.manifest.json", parts[0], {"figure": figure, "rows": len(rows)})
    if plot and figure in ("fig3", "fig4", "fig5"):
        column, label = ("pi_e", "pi_e") if figure == "fig4" else ("j_x0", "J(x0)")
        script = gnuplot_script(figure, f"{figure}.csv", column, label, parts[0].policies, parts[0].p_s)
        (out / f"{figure}.gp").write_text(script)

    if figure == "fig3":
        return check_fig3(rows)
    if figure == "fig4":
        return check_fig4(rows)
    if figure == "fig5":
        return check_fig5(rows)
    if figure == "fig6":
        base = parts[0].base
        return check_fig6(rows, base.eps_ape * base.gamma / (1 - base.gamma))
    return check_fig7(rows)
