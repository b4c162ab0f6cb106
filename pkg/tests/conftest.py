import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from aoi_mdp.kernel import build_kernel  # noqa: E402
from aoi_mdp.model import ModelParams, StateSpace  # noqa: E402

ACCEPTANCE_LINES = []
PA = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
PS = [0.8, 0.6, 0.4, 0.2]


def record(criterion, label, passed, detail=""):
    """Note an acceptance outcome for the end-of-run summary and return ``passed``."""
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(f"[{status}] criterion {criterion}: {label}" + (f" ({detail})" if detail else ""))
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def basic_params():
    return ModelParams()


@pytest.fixture(scope="session")
def basic_space(basic_params):
    return StateSpace(basic_params)


@pytest.fixture(scope="session")
def basic_kernel(basic_space):
    """Kernel of the basic scenario at p_a = 0.4, p_s = 0.8."""
    params = ModelParams(p_a=0.4)
    return build_kernel(basic_space, params)


@pytest.fixture(scope="session")
def basic_solution(basic_kernel):
    from aoi_mdp.solver import optimistic_policy_iteration

    return optimistic_policy_iteration(basic_kernel)


@pytest.fixture(scope="session")
def grid():
    """Every policy solved over the basic p_s x p_a grid: ``({(p_s, p_a, policy): row}, seconds)``."""
    from aoi_mdp.scenario import POLICIES, run_grid

    start = time.perf_counter()
    points = [ModelParams(p_a=pa, p_s=ps) for ps in PS for pa in PA]
    rows = [r for res in run_grid(points, POLICIES) for r in res.rows]
    return {(r["p_s"], r["p_a"], r["policy"]): r for r in rows}, time.perf_counter() - start
