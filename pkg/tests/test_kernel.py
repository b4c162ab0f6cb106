import numpy as np
import pytest

from aoi_mdp.kernel import KernelError, build_kernel, control_code, decode_control
from aoi_mdp.model import Control, ModelParams, StateSpace, SystemState, constraint_control_set


def test_control_codes_round_trip_in_order():
    controls = [(0, 0, 0), (0, 1, 0), (1, 0, 0), (1, 1, 0), (1, 1, 1)]
    codes = [control_code(u) for u in controls]
    assert codes == sorted(codes)
    assert [decode_control(c) for c in codes] == [Control(*u) for u in controls]


def test_rows_are_stochastic(basic_kernel):
    sums = np.asarray(basic_kernel.trans.sum(axis=1)).ravel()
    assert np.max(np.abs(sums - 1.0)) <= 1e-12
    assert (basic_kernel.trans.data > 0).all()


def test_every_admissible_pair_has_a_row(basic_kernel, basic_space):
    for i in (0, 17, 4000, len(basic_space) - 1):
        assert basic_kernel.controls(i) == list(constraint_control_set(basic_space[i], basic_space.params))


def _row_by_state(kernel, space, state, u):
    return {space[j]: p for j, p in kernel.row(space.index[state], u)}


def test_empty_state_row(basic_space):
    kernel = build_kernel(basic_space, ModelParams(p_a=0.3, p_s=0.8))
    row = _row_by_state(kernel, basic_space, SystemState(2, 0, (0, 0, 0, 0)), (0, 0, 0))
    assert row.keys() == {SystemState(3, 0, (0, 0, 0, 0)), SystemState(3, 1, (-1, 0, 0, 0))}
    assert row[SystemState(3, 0, (0, 0, 0, 0))] == pytest.approx(0.7, abs=1e-15)
    assert row[SystemState(3, 1, (-1, 0, 0, 0))] == pytest.approx(0.3, abs=1e-15)


def test_serving_state_row(basic_kernel, basic_space):
    state = SystemState(5, 1, (2, 0, 0, 0))
    row = _row_by_state(basic_kernel, basic_space, state, (0, 0, 0))
    expected = {
        SystemState(3, 0, (0, 0, 0, 0)): 0.8 * 0.6,
        SystemState(3, 1, (-1, 0, 0, 0)): 0.8 * 0.4,
        SystemState(6, 2, (3, 0, 0, 0)): 0.2 * 0.6,
        SystemState(6, 2, (3, -1, 0, 0)): 0.2 * 0.4,
    }
    assert row.keys() == expected.keys()
    for s, p in expected.items():
        assert row[s] == pytest.approx(p, abs=1e-15)


def test_costs_follow_next_age(basic_kernel, basic_space):
    i = basic_space.index[SystemState(5, 1, (2, 0, 0, 0))]
    for j, _ in basic_kernel.row(i, (0, 0, 0)):
        assert basic_kernel.cost(i, (0, 0, 0), j) == basic_space[j].delta


def test_delta_max_rows(basic_kernel, basic_space):
    dmax = basic_space.params.delta_max
    for i, s in enumerate(basic_space):
        if s.delta != dmax:
            continue
        assert basic_kernel.controls(i) == [Control(1, 1, 1)]
        for j, _ in basic_kernel.row(i, (1, 1, 1)):
            assert basic_space[j].delta == 1
            assert basic_kernel.cost(i, (1, 1, 1), j) == 100.0


def test_inadmissible_lookup(basic_kernel):
    with pytest.raises(KernelError):
        basic_kernel.row(0, (1, 1, 1))
    with pytest.raises(KernelError):
        basic_kernel.rows_for(np.full(basic_kernel.n, control_code((1, 1, 1))))


def test_structure_mismatch_rejected(basic_space):
    with pytest.raises(KernelError):
        build_kernel(basic_space, ModelParams(q=3))


def test_missing_successor_rejected():
    params = ModelParams(q=2, delta_max=3, r_max=1, g_max_cost=10.0)
    truncated = StateSpace(params).states[:5]
    with pytest.raises(KernelError):
        build_kernel(StateSpace(params, truncated))


def test_deterministic(basic_space):
    a = build_kernel(basic_space, ModelParams(p_a=0.4))
    b = build_kernel(basic_space, ModelParams(p_a=0.4))
    assert (a.trans != b.trans).nnz == 0
    assert np.array_equal(a.costs, b.costs)
    assert np.array_equal(a.pair_code, b.pair_code)


def test_zero_probability_branches_omitted(basic_space):
    kernel = build_kernel(basic_space, ModelParams(p_a=0.0, p_s=1.0))
    rows = np.diff(kernel.trans.indptr)
    assert rows.max() == 1
