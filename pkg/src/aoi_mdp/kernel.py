"""Sparse transition kernel ``p_ij(u)`` with per-transition costs.

Every admissible ``(state, control)`` pair is one row of a CSR matrix whose
columns are successor state indices.  Pairs are laid out state by state and,
within a state, in lexicographic control order, so ``pair_ptr[i]`` ..
``pair_ptr[i + 1]`` are the rows of state ``i``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .model import (
    Control,
    ModelParams,
    StateSpace,
    constraint_control_set,
    successors,
    transition_cost,
)


class KernelError(RuntimeError):
    pass


def control_code(u) -> int:
    """Encode a control as ``4*u_s + 2*u_d + u_p``; numeric order is lexicographic order."""
    return 4 * u[0] + 2 * u[1] + u[2]


def decode_control(code: int) -> Control:
    code = int(code)
    return Control((code >> 2) & 1, (code >> 1) & 1, code & 1)


class TransitionKernel:
    def __init__(self, space: StateSpace, pair_ptr, pair_state, pair_code, trans, costs):
        self.space = space
        self.params = space.params
        self.n = len(space)
        self.pair_ptr = pair_ptr
        self.pair_state = pair_state
        self.pair_code = pair_code
        self.trans = trans
        # costs[k] is g(i, u, j) for the k-th stored entry of ``trans``
        self.costs = costs
        # every row has at least one successor, which reduceat relies on
        self.expected_cost = np.add.reduceat(trans.data * costs, trans.indptr[:-1])

    @property
    def n_pairs(self) -> int:
        return len(self.pair_state)

    def controls(self, i: int) -> list[Control]:
        return [decode_control(c) for c in self.pair_code[self.pair_ptr[i]:self.pair_ptr[i + 1]]]

    def pair_index(self, i: int, u) -> int:
        code = control_code(u)
        lo, hi = self.pair_ptr[i], self.pair_ptr[i + 1]
        for k in range(lo, hi):
            if self.pair_code[k] == code:
                return k
        raise KernelError(f"control {tuple(u)} is not admissible at state {i}")

    def row(self, i: int, u) -> list[tuple[int, float]]:
        k = self.pair_index(i, u)
        lo, hi = self.trans.indptr[k], self.trans.indptr[k + 1]
        return list(zip(self.trans.indices[lo:hi].tolist(), self.trans.data[lo:hi].tolist()))

    def cost(self, i: int, u, j: int) -> float:
        k = self.pair_index(i, u)
        lo, hi = self.trans.indptr[k], self.trans.indptr[k + 1]
        hit = np.flatnonzero(self.trans.indices[lo:hi] == j)
        if len(hit) == 0:
            raise KernelError(f"state {j} is not a successor of ({i}, {tuple(u)})")
        return float(self.costs[lo + hit[0]])

    def rows_for(self, codes: np.ndarray) -> np.ndarray:
        """Pair indices selecting control ``codes[i]`` at every state ``i``."""
        codes = np.asarray(codes)
        rows = np.full(self.n, -1, dtype=np.int64)
        match = self.pair_code == codes[self.pair_state]
        rows[self.pair_state[match]] = np.flatnonzero(match)
        if (rows < 0).any():
            bad = int(np.flatnonzero(rows < 0)[0])
            raise KernelError(f"control code {int(codes[bad])} is not admissible at state {bad}")
        return rows


def build_kernel(space: StateSpace, params: ModelParams | None = None) -> TransitionKernel:
    """Enumerate ``p_ij(u)`` and ``g(i, u, j)`` for every admissible pair of ``space``.

    ``params`` may differ from ``space.params`` in probabilities, costs and
    discounting, but must share ``q``, ``delta_max`` and ``r_max``.
    """
    if params is None:
        params = space.params
    elif (params.q, params.delta_max, params.r_max) != (space.params.q, space.params.delta_max, space.params.r_max):
        raise KernelError("params do not match the structure of the state space")
    if params is not space.params:
        space = StateSpace(params, space.states)

    index = space.index
    pair_ptr = [0]
    pair_state: list[int] = []
    pair_code: list[int] = []
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    costs: list[float] = []

    for i, state in enumerate(space.states):
        for u in constraint_control_set(state, params):
            row = []
            for nxt, p in successors(state, u, params):
                j = index.get(nxt)
                if j is None:
                    raise KernelError(f"successor {nxt.vector()} of {state.vector()} is not enumerated")
                row.append((j, p, transition_cost(state, u, nxt, params)))
            row.sort()
            for j, p, g in row:
                indices.append(j)
                data.append(p)
                costs.append(g)
            indptr.append(len(indices))
            pair_state.append(i)
            pair_code.append(control_code(u))
        pair_ptr.append(len(pair_state))

    trans = sp.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(pair_state), len(space)),
    )
    return TransitionKernel(
        space,
        np.array(pair_ptr, dtype=np.int64),
        np.array(pair_state, dtype=np.int64),
        np.array(pair_code, dtype=np.int8),
        trans,
        np.array(costs),
    )
