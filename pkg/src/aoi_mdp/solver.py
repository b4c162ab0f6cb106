"""Policy evaluation, optimistic policy iteration and heuristic policies."""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np

from .kernel import TransitionKernel, control_code, decode_control
from .model import Control, ModelParams, StateSpace, constraint_control_set, occupancy

log = logging.getLogger(__name__)

HEURISTICS = ("zero_wait", "max_sampling", "never_sample")


class ConvergenceError(RuntimeError):
    pass


class Policy:
    """Stationary deterministic policy: one control per state of ``space``."""

    def __init__(self, space: StateSpace, codes):
        self.space = space
        self.codes = np.asarray(codes, dtype=np.int8)
        if len(self.codes) != len(space):
            raise ValueError(f"expected {len(space)} controls, got {len(self.codes)}")

    def __len__(self):
        return len(self.codes)

    def __getitem__(self, i: int) -> Control:
        return decode_control(self.codes[i])

    def control_at(self, state) -> Control:
        return decode_control(self.codes[self.space.index[state]])

    def __eq__(self, other):
        if not isinstance(other, Policy):
            return NotImplemented
        return self.space.states == other.space.states and np.array_equal(self.codes, other.codes)

    def is_admissible(self) -> bool:
        params = self.space.params
        return all(
            self[i] in constraint_control_set(s, params) for i, s in enumerate(self.space.states)
        )


class SolveResult(NamedTuple):
    policy: Policy
    values: np.ndarray
    rounds: int
    residual: float


def _policy_operator(policy: Policy, kernel: TransitionKernel):
    rows = kernel.rows_for(policy.codes)
    return kernel.expected_cost[rows], kernel.trans[rows]


def evaluate_policy(policy, kernel, params=None, j_init=None, max_sweeps=10_000_000, record=None):
    """Approximate policy evaluation by synchronous sweeps.

    Each sweep computes ``J'(i) = sum_j p_ij(mu(i)) [g(i, mu(i), j) + gamma J(j)]``
    from the previous table only.  Stops once ``max_i |J'(i) - J(i)| < eps_ape``
    and returns ``J'``.  If ``record`` is a list, the sweep distances are
    appended to it.
    """
    params = params or kernel.params
    cost, trans = _policy_operator(policy, kernel)
    values = np.zeros(kernel.n) if j_init is None else np.array(j_init, dtype=float)
    for _ in range(max_sweeps):
        updated = cost + params.gamma * (trans @ values)
        dist = float(np.max(np.abs(updated - values)))
        values = updated
        if record is not None:
            record.append(dist)
        if dist < params.eps_ape:
            return values
    raise ConvergenceError(f"policy evaluation did not converge in {max_sweeps} sweeps")


def q_values(values, kernel, params=None) -> np.ndarray:
    """Expected one-step lookahead cost of every (state, control) pair."""
    params = params or kernel.params
    return kernel.expected_cost + params.gamma * (kernel.trans @ values)


def _state_minima(q, kernel):
    return np.minimum.reduceat(q, kernel.pair_ptr[:-1])


def greedy_improvement(values, kernel, params=None) -> Policy:
    """Greedy policy w.r.t. ``values``; exact ties go to the lexicographically smallest control."""
    q = q_values(values, kernel, params)
    best = _state_minima(q, kernel)
    hits = np.flatnonzero(q == best[kernel.pair_state])
    # pairs are stored in lexicographic control order, so the first hit per state wins
    _, first = np.unique(kernel.pair_state[hits], return_index=True)
    return Policy(kernel.space, kernel.pair_code[hits[first]])


def bellman_residual(values, kernel, params=None) -> float:
    """``max_i |J(i) - min_u sum_j p_ij(u) [g(i, u, j) + gamma J(j)]|``."""
    best = _state_minima(q_values(values, kernel, params), kernel)
    return float(np.max(np.abs(np.asarray(values) - best)))


def policy_residual(policy, values, kernel, params=None) -> float:
    """Sup-norm gap between ``values`` and one application of the policy's own operator."""
    params = params or kernel.params
    cost, trans = _policy_operator(policy, kernel)
    return float(np.max(np.abs(values - (cost + params.gamma * (trans @ values)))))


def optimistic_policy_iteration(kernel, params=None, initial=None, max_rounds=1000) -> SolveResult:
    """Alternate greedy improvement and warm-started evaluation until the policy is stable.

    Starts from ``initial`` (never-sample by default) evaluated from zero.
    Raises :class:`ConvergenceError` if the policy is still changing after
    ``max_rounds`` improvements or if the final Bellman residual exceeds
    ``eps_residual``.
    """
    params = params or kernel.params
    policy = initial if initial is not None else heuristic_policy("never_sample", kernel.space, params)
    values = evaluate_policy(policy, kernel, params)
    for rounds in range(1, max_rounds + 1):
        improved = greedy_improvement(values, kernel, params)
        stable = improved == policy
        values = evaluate_policy(improved, kernel, params, j_init=values)
        policy = improved
        log.debug("OPI round %d: %s", rounds, "stable" if stable else "changed")
        if stable:
            residual = bellman_residual(values, kernel, params)
            if residual > params.eps_residual:
                raise ConvergenceError(
                    f"stable policy but Bellman residual {residual:.3e} exceeds {params.eps_residual:.3e}"
                )
            return SolveResult(policy, values, rounds, residual)
    raise ConvergenceError(f"policy iteration did not stabilise within {max_rounds} rounds")


def heuristic_policy(kind: str, space: StateSpace, params: ModelParams | None = None) -> Policy:
    """Zero-wait, max-sampling or never-sample baseline policy over ``space``.

    Among admissible controls with the desired ``u_s``, the one with the
    smallest ``(u_d, u_p)`` is chosen.
    """
    if kind not in HEURISTICS:
        raise ValueError(f"unknown heuristic {kind!r}; expected one of {HEURISTICS}")
    params = params or space.params
    codes = np.empty(len(space), dtype=np.int8)
    for i, state in enumerate(space.states):
        allowed = constraint_control_set(state, params)
        if state.delta == params.delta_max:
            want = 1
        elif kind == "zero_wait":
            want = 1 if occupancy(state)[0] == 0 else 0
        elif kind == "max_sampling":
            want = 1
        else:
            want = 0
        matching = [u for u in allowed if u.u_s == want] or list(allowed)
        codes[i] = control_code(min(matching))
    return Policy(space, codes)


def never_sample_period_cost(params: ModelParams | None = None, *, delta_max=None, g_max_cost=None) -> float:
    """Cost of one never-sample period: ``2 + 3 + ... + delta_max`` plus the expensive slot.

    Either pass ``params`` or both keywords; the keyword form skips parameter
    validation so degenerate values such as ``g_max_cost=0`` can be evaluated.
    """
    if params is not None:
        delta_max, g_max_cost = params.delta_max, params.g_max_cost
    if delta_max is None or g_max_cost is None:
        raise TypeError("need params or both delta_max and g_max_cost")
    return delta_max * (delta_max + 1) / 2 - 1 + g_max_cost
