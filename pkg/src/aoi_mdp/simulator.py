"""Monte Carlo simulation of the slotted system under a fixed policy.

Only the transition function of :mod:`aoi_mdp.model` is used here; nothing
from the kernel or the solver.  Randomness comes from SplitMix64::

    state <- state + 0x9E3779B97F4A7C15            (mod 2**64)
    z <- (state ^ (state >> 30)) * 0xBF58476D1CE4E5B9
    z <- (z ^ (z >> 27)) * 0x94D049BB133111EB
    out <- z ^ (z >> 31)

with the seed as the initial state.  A uniform double is ``(out >> 11) * 2**-53``
and a Bernoulli(p) draw is ``uniform < p``.  Each slot consumes two outputs,
first for the application arrival ``w_a`` and then for the transmission
outcome ``w_s``.
"""

from __future__ import annotations

import math
from statistics import NormalDist
from typing import NamedTuple

import numpy as np

from .model import Disturbance, ModelParams, initial_state, transition, transition_cost

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
DOUBLE_UNIT = 2.0 ** -53


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * MIX1) & MASK64
        z = ((z ^ (z >> 27)) * MIX2) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * DOUBLE_UNIT

    def bernoulli(self, p: float) -> int:
        return 1 if self.uniform() < p else 0


class SplitMix64Array:
    """Independent SplitMix64 streams, one per element, advanced in lockstep."""

    def __init__(self, seeds):
        self.state = np.array([s & MASK64 for s in seeds], dtype=np.uint64)

    def next_u64(self) -> np.ndarray:
        self.state += np.uint64(GOLDEN)
        z = self.state.copy()
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
        return z ^ (z >> np.uint64(31))

    def uniform(self) -> np.ndarray:
        return (self.next_u64() >> np.uint64(11)).astype(np.float64) * DOUBLE_UNIT

    def bernoulli(self, p: float) -> np.ndarray:
        return (self.uniform() < p).astype(np.int64)


class Step(NamedTuple):
    k: int
    state: object
    control: object
    disturbance: Disturbance
    cost: float


class Trajectory(NamedTuple):
    records: list[Step]
    seed: int
    final_state: object

    def states(self):
        return [step.state for step in self.records] + [self.final_state]

    def costs(self) -> list[float]:
        return [step.cost for step in self.records]


def simulate(policy, params: ModelParams, seed: int, horizon: int) -> Trajectory:
    """Run ``horizon`` slots from the initial state under ``policy``."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    rng = SplitMix64(seed)
    state = initial_state(params)
    records = []
    for k in range(horizon):
        control = policy.control_at(state)
        w_a = rng.bernoulli(params.p_a)
        w_s = rng.bernoulli(params.p_s)
        dist = Disturbance(w_a, w_s)
        nxt = transition(state, control, dist, params)
        records.append(Step(k, state, control, dist, transition_cost(state, control, nxt, params)))
        state = nxt
    return Trajectory(records, seed, state)


def truncation_horizon(params: ModelParams) -> int:
    """Smallest ``N`` with ``gamma**N * G / (1 - gamma) < eps_ape``."""
    n = math.ceil(math.log(params.eps_ape / params.value_bound) / math.log(params.gamma))
    n = max(n, 1)
    while params.gamma ** n * params.value_bound >= params.eps_ape:
        n += 1
    return n


class _Walker:
    """Vectorised policy rollouts over a lazily built successor table.

    Local state ids are assigned on first visit; ``table[id, 2*w_a + w_s]``
    caches the successor id and ``costs`` the matching transition cost, both
    obtained from :func:`transition`.
    """

    def __init__(self, policy, params: ModelParams):
        self.policy = policy
        self.params = params
        self.states = []
        self.ids = {}
        self.table = np.full((64, 4), -1, dtype=np.int64)
        self.costs = np.zeros((64, 4))
        self.delta = np.zeros(64, dtype=np.int64)
        self.root = self._intern(initial_state(params))

    def _intern(self, state) -> int:
        sid = self.ids.get(state)
        if sid is not None:
            return sid
        sid = len(self.states)
        if sid >= len(self.table):
            grow = len(self.table)
            self.table = np.vstack([self.table, np.full((grow, 4), -1, dtype=np.int64)])
            self.costs = np.vstack([self.costs, np.zeros((grow, 4))])
            self.delta = np.concatenate([self.delta, np.zeros(grow, dtype=np.int64)])
        self.states.append(state)
        self.ids[state] = sid
        self.delta[sid] = state.delta
        return sid

    def _fill(self, sid: int, code: int) -> None:
        state = self.states[sid]
        control = self.policy.control_at(state)
        nxt = transition(state, control, Disturbance(code >> 1, code & 1), self.params)
        self.costs[sid, code] = transition_cost(state, control, nxt, self.params)
        self.table[sid, code] = self._intern(nxt)

    def step(self, current: np.ndarray, codes: np.ndarray):
        nxt = self.table[current, codes]
        missing = np.flatnonzero(nxt < 0)
        if len(missing):
            for sid, code in set(zip(current[missing].tolist(), codes[missing].tolist())):
                self._fill(sid, code)
            nxt = self.table[current, codes]
        return nxt, self.costs[current, codes]

    def run(self, seeds, horizon: int, discount: float | None = None, count_from: int = 0):
        """Per-run discounted cost sums and counts of ``delta == delta_max`` slots.

        Slots before ``count_from`` are not counted.
        """
        rng = SplitMix64Array(seeds)
        current = np.full(len(seeds), self.root, dtype=np.int64)
        totals = np.zeros(len(seeds))
        hits = np.zeros(len(seeds), dtype=np.int64)
        weight = 1.0
        dmax = self.params.delta_max
        for k in range(horizon):
            w_a = rng.bernoulli(self.params.p_a)
            w_s = rng.bernoulli(self.params.p_s)
            if k >= count_from:
                hits += self.delta[current] == dmax
            current, cost = self.step(current, 2 * w_a + w_s)
            if discount is not None:
                totals += weight * cost
                weight *= discount
        return totals, hits


def estimate_discounted_cost(policy, params: ModelParams, base_seed: int = 0, n_runs: int = 10_000,
                             horizon: int | None = None) -> tuple[float, float]:
    """Sample mean of the truncated discounted cost and its 99% normal half-width.

    Run ``r`` uses seed ``base_seed + r``.  The default horizon makes the
    truncation bias smaller than ``eps_ape``.
    """
    if n_runs < 2:
        raise ValueError("need at least two runs for a confidence interval")
    horizon = horizon or truncation_horizon(params)
    totals, _ = _Walker(policy, params).run(
        [base_seed + r for r in range(n_runs)], horizon, discount=params.gamma
    )
    z = NormalDist().inv_cdf(0.995)
    # identical runs (deterministic policies and dynamics) have exactly zero spread
    spread = totals.std(ddof=1) if np.ptp(totals) > 0 else 0.0
    return float(totals.mean()), float(z * spread / math.sqrt(n_runs))


def expensive_channel_frequency(policy, params: ModelParams, base_seed: int = 0, n_runs: int = 100,
                                horizon: int = 100_000, burn_in: int = 1_000) -> tuple[float, float]:
    """Long-run fraction of slots spent at ``delta == delta_max`` and its standard error.

    The standard error is taken across the independent runs.
    """
    seeds = [base_seed + r for r in range(n_runs)]
    _, hits = _Walker(policy, params).run(seeds, burn_in + horizon, count_from=burn_in)
    frac = hits / horizon
    return float(frac.mean()), float(frac.std(ddof=1) / math.sqrt(n_runs))
