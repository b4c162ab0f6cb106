"""Single-slot dynamics of the AoI-constrained status-update system.

A state is ``[delta, r, a^1 .. a^Q]``: the age of information at the
destination, the index of the transmission attempt in progress (0 when the
server is idle) and one delay counter per queue position.  Counter values are
``-1`` for an application packet, ``0`` for an empty position and ``k > 0``
for a status update that has spent ``k`` slots in the system.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple


class ModelError(ValueError):
    """Raised for invalid parameters or inadmissible controls."""


@dataclass(frozen=True)
class ModelParams:
    q: int = 4
    delta_max: int = 10
    r_max: int = 4
    g_max_cost: float = 100.0
    gamma: float = 0.99
    p_a: float = 0.0
    p_s: float = 0.8
    eps_ape: float = 1e-8
    eps_residual: float = 1e-6

    def __post_init__(self):
        for name in ("q", "delta_max", "r_max"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ModelError(f"{name} must be an integer, got {value!r}")
        if self.q < 2:
            raise ModelError(f"q must be >= 2, got {self.q}")
        if self.delta_max < 2:
            raise ModelError(f"delta_max must be >= 2, got {self.delta_max}")
        if self.r_max < 1:
            raise ModelError(f"r_max must be >= 1, got {self.r_max}")
        if not self.g_max_cost > self.delta_max:
            raise ModelError(
                f"g_max_cost must exceed delta_max ({self.delta_max}), got {self.g_max_cost}"
            )
        if not 0.0 < self.gamma < 1.0:
            raise ModelError(f"gamma must lie in (0, 1), got {self.gamma}")
        for name in ("p_a", "p_s"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ModelError(f"{name} must lie in [0, 1], got {value}")
        for name in ("eps_ape", "eps_residual"):
            if not getattr(self, name) > 0.0:
                raise ModelError(f"{name} must be positive")

    @property
    def value_bound(self) -> float:
        """Upper bound on any discounted cost, ``G / (1 - gamma)``."""
        return self.g_max_cost / (1.0 - self.gamma)


class SystemState(NamedTuple):
    delta: int
    r: int
    a: tuple[int, ...]

    def vector(self) -> tuple[int, ...]:
        return (self.delta, self.r, *self.a)

    @classmethod
    def from_vector(cls, vec) -> "SystemState":
        vec = tuple(int(v) for v in vec)
        return cls(vec[0], vec[1], vec[2:])


class Control(NamedTuple):
    u_s: int
    u_d: int
    u_p: int


class Disturbance(NamedTuple):
    w_a: int
    w_s: int


IDLE = Control(0, 0, 0)
SAMPLE = Control(1, 0, 0)
DROP = Control(0, 1, 0)
SAMPLE_DROP = Control(1, 1, 0)
PREEMPT = Control(1, 1, 1)

ALL_CONTROLS = (IDLE, DROP, SAMPLE, SAMPLE_DROP, PREEMPT)
DISTURBANCES = (Disturbance(0, 0), Disturbance(0, 1), Disturbance(1, 0), Disturbance(1, 1))


def is_admissible_triple(u: Control) -> bool:
    """The control-space predicate: ``not u_p or (u_p and u_s and u_d)``."""
    return (not u.u_p) or bool(u.u_p and u.u_s and u.u_d)


def initial_state(params: ModelParams) -> SystemState:
    return SystemState(0, 0, (0,) * params.q)


def occupancy(state: SystemState) -> tuple[int, int]:
    """Return ``(n_m, n_p)``: last occupied position and number of application packets."""
    a = state.a
    n_m = 0
    for q in range(len(a), 0, -1):
        if a[q - 1] != 0:
            n_m = q
            break
    n_p = sum(1 for v in a if v == -1)
    return n_m, n_p


def constraint_control_set(state: SystemState, params: ModelParams) -> tuple[Control, ...]:
    """Admissible controls at ``state``, in lexicographic order."""
    if state.delta == params.delta_max:
        return (PREEMPT,)
    full = state.a[-1] != 0
    if state.r == params.r_max:
        return (DROP,) if full else (DROP, SAMPLE_DROP)
    return (IDLE,) if full else (IDLE, SAMPLE)


def _step(state: SystemState, control: Control, w_a: int, w_s: int, params: ModelParams) -> SystemState:
    delta, r, a = state
    q_cap = params.q

    if delta == params.delta_max:
        # Expensive channel: every status update goes, application packets stay in order.
        queue = [-1] * sum(1 for v in a if v == -1)
        if w_a and len(queue) < q_cap:
            queue.append(-1)
        queue.extend([0] * (q_cap - len(queue)))
        return SystemState(1, 1 if queue[0] else 0, tuple(queue))

    head = a[0]
    busy = head != 0
    success = busy and w_s == 1
    departs = busy and (w_s == 1 or control.u_d == 1)

    occupied = [v for v in a if v != 0]
    if departs:
        occupied = occupied[1:]
    queue = [v + 1 if v > 0 else v for v in occupied]
    if control.u_s:
        queue.append(1)
    if w_a and len(queue) < q_cap:
        queue.append(-1)
    queue.extend([0] * (q_cap - len(queue)))

    new_delta = head + 1 if success and head != -1 else delta + 1
    if busy and not departs:
        new_r = r + 1
    else:
        new_r = 1 if queue[0] else 0
    return SystemState(new_delta, new_r, tuple(queue))


def transition(state: SystemState, control: Control, dist: Disturbance, params: ModelParams) -> SystemState:
    """Successor of ``state`` under ``control`` and disturbance ``(w_a, w_s)``."""
    control = Control(*control)
    if control not in constraint_control_set(state, params):
        raise ModelError(f"control {tuple(control)} is not admissible at {state.vector()}")
    w_a, w_s = dist
    if w_a not in (0, 1) or w_s not in (0, 1):
        raise ModelError(f"disturbance components must be binary, got {tuple(dist)}")
    return _step(state, control, w_a, w_s, params)


def transition_cost(state: SystemState, control: Control, next_state: SystemState, params: ModelParams) -> float:
    if state.delta == params.delta_max:
        return float(params.g_max_cost)
    return float(next_state.delta)


def successors(state: SystemState, control: Control, params: ModelParams) -> list[tuple[SystemState, float]]:
    """Distinct successors with merged probabilities; zero-probability branches omitted.

    The order follows the first disturbance (in ``DISTURBANCES`` order) that
    reaches each successor.
    """
    prob_a = (1.0 - params.p_a, params.p_a)
    prob_s = (1.0 - params.p_s, params.p_s)
    merged: dict[SystemState, float] = {}
    for w_a, w_s in DISTURBANCES:
        p = prob_a[w_a] * prob_s[w_s]
        if p == 0.0:
            continue
        nxt = _step(state, control, w_a, w_s, params)
        merged[nxt] = merged.get(nxt, 0.0) + p
    return list(merged.items())


class StateSpace:
    """Reachable states in canonical order with a stable integer index."""

    def __init__(self, params: ModelParams, states: list[SystemState] | None = None):
        self.params = params
        self.states = states if states is not None else enumerate_reachable_states(params)
        self.index = {s: i for i, s in enumerate(self.states)}
        self.initial_index = self.index[initial_state(params)]

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, i: int) -> SystemState:
        return self.states[i]

    def __iter__(self):
        return iter(self.states)


def enumerate_reachable_states(params: ModelParams) -> list[SystemState]:
    """All states reachable from the initial state, in canonical (lexicographic) order.

    Closure is taken over every admissible control and all four disturbances,
    independently of ``p_a`` and ``p_s``, so the state set only depends on
    ``q``, ``delta_max`` and ``r_max``.
    """
    start = initial_state(params)
    seen = {start}
    frontier = deque([start])
    while frontier:
        state = frontier.popleft()
        for control in constraint_control_set(state, params):
            for w_a, w_s in DISTURBANCES:
                nxt = _step(state, control, w_a, w_s, params)
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
    return sorted(seen)


def check_state(state: SystemState, params: ModelParams) -> list[str]:
    """Return the list of violated state invariants (empty when valid)."""
    problems = []
    delta, r, a = state
    if len(a) != params.q:
        problems.append("wrong number of counters")
    if not 0 <= delta <= params.delta_max:
        problems.append("delta out of range")
    if not 0 <= r <= params.r_max:
        problems.append("r out of range")
    if any(v < -1 or v > params.delta_max for v in a):
        problems.append("counter out of range")
    if delta > 0 and any(v > delta for v in a):
        problems.append("status update older than the age of information")
    seen_empty = False
    for v in a:
        if v == 0:
            seen_empty = True
        elif seen_empty:
            problems.append("hole in queue")
            break
    if (r == 0) != (a[0] == 0):
        problems.append("attempt counter inconsistent with head of line")
    ages = [v for v in a if v > 0]
    if any(x < y for x, y in zip(ages, ages[1:])):
        problems.append("waiting order violated")
    return problems
