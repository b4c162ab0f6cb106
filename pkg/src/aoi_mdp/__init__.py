"""Exact MDP solver and analysis toolkit for AoI-constrained status updates over a shared FIFO queue."""

__version__ = "0.1.0"

from .analysis import (
    InducedChain,
    expensive_channel_probability,
    induce_chain,
    recurrent_class,
    steady_state,
)
from .kernel import TransitionKernel, build_kernel
from .model import (
    Control,
    Disturbance,
    ModelParams,
    StateSpace,
    SystemState,
    constraint_control_set,
    enumerate_reachable_states,
    initial_state,
    occupancy,
    transition,
    transition_cost,
)
from .solver import (
    Policy,
    bellman_residual,
    evaluate_policy,
    greedy_improvement,
    heuristic_policy,
    never_sample_period_cost,
    optimistic_policy_iteration,
)
