"""Steady-state behaviour of the Markov chain induced by a fixed policy."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

STEADY_TOL = 1e-13


class AnalysisError(RuntimeError):
    pass


@dataclass(frozen=True)
class InducedChain:
    matrix: sp.csr_matrix
    source_index: int

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def successors(self, i: int) -> list[tuple[int, float]]:
        lo, hi = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return list(zip(self.matrix.indices[lo:hi].tolist(), self.matrix.data[lo:hi].tolist()))


def induce_chain(policy, kernel) -> InducedChain:
    """Row ``i`` of the chain is the kernel row ``(i, policy(i))``."""
    rows = kernel.rows_for(policy.codes)
    return InducedChain(sp.csr_matrix(kernel.trans[rows]), kernel.space.initial_index)


def _reachable(matrix, source) -> np.ndarray:
    seen = np.zeros(matrix.shape[0], dtype=bool)
    seen[source] = True
    frontier = deque([source])
    indptr, indices = matrix.indptr, matrix.indices
    while frontier:
        i = frontier.popleft()
        for j in indices[indptr[i]:indptr[i + 1]]:
            if not seen[j]:
                seen[j] = True
                frontier.append(j)
    return seen


def recurrent_class(chain: InducedChain) -> np.ndarray:
    """Sorted indices of the unique closed communicating class reachable from the source."""
    matrix = chain.matrix
    _, labels = connected_components(matrix, directed=True, connection="strong")
    reach = _reachable(matrix, chain.source_index)

    # a component is closed when no edge leaves it
    coo = matrix.tocoo()
    leaving = labels[coo.row] != labels[coo.col]
    open_labels = set(np.unique(labels[coo.row[leaving]]).tolist())
    closed = sorted({int(c) for c in np.unique(labels[reach])} - open_labels)
    if len(closed) != 1:
        raise AnalysisError(f"expected one closed class reachable from the source, found {len(closed)}")
    return np.flatnonzero(labels == closed[0])


def period(matrix, members) -> int:
    """Period of an irreducible class, as the gcd of level differences along its edges."""
    members = np.asarray(members)
    sub = matrix[members][:, members].tocsr()
    level = np.full(len(members), -1, dtype=np.int64)
    level[0] = 0
    frontier = deque([0])
    d = 0
    while frontier:
        i = frontier.popleft()
        for j in sub.indices[sub.indptr[i]:sub.indptr[i + 1]]:
            if level[j] < 0:
                level[j] = level[i] + 1
                frontier.append(j)
            else:
                d = math.gcd(d, int(level[i] + 1 - level[j]))
    return d if d > 0 else 1


def steady_state(chain: InducedChain, members, max_sweeps=5_000, max_fallback_sweeps=1_000_000,
                 tol=STEADY_TOL) -> np.ndarray:
    """Stationary distribution on ``members``, returned as a full-length vector.

    Plain power iteration is tried first.  If ``||pi P - pi||_inf <= tol`` is
    not reached within ``max_sweeps`` sweeps (periodic or nearly periodic
    chains), each sweep is replaced by the mean of two consecutive iterates,
    ``pi <- (pi + pi P) / 2``.  The averaged iteration has the same fixed
    point, no periodic modes, and converges to the time-average distribution.
    """
    members = np.asarray(members)
    sub = chain.matrix[members][:, members].tocsr()
    step = sub.T.tocsr()
    pi = np.full(len(members), 1.0 / len(members))

    for _ in range(max_sweeps):
        nxt = step @ pi
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) <= tol:
            return _embed(chain.n, members, pi)
        pi = nxt

    for _ in range(max_fallback_sweeps):
        nxt = step @ pi
        if np.max(np.abs(nxt - pi)) <= tol:
            return _embed(chain.n, members, pi / pi.sum())
        pi = 0.5 * (pi + nxt)
        pi /= pi.sum()
    raise AnalysisError(
        f"steady state not found: {len(members)} states, period {period(chain.matrix, members)}, "
        f"{max_sweeps} plain and {max_fallback_sweeps} averaged sweeps"
    )


def _embed(n, members, values) -> np.ndarray:
    full = np.zeros(n)
    full[members] = values
    return full


def stationarity_residual(chain: InducedChain, pi) -> float:
    return float(np.max(np.abs(chain.matrix.T @ pi - pi)))


def expensive_channel_probability(pi, states, delta_max: int | None = None) -> float:
    """Steady-state mass of the states with ``delta == delta_max``.

    ``delta_max`` defaults to ``states.params.delta_max`` for a ``StateSpace``.
    """
    if delta_max is None:
        delta_max = states.params.delta_max
    mask = np.fromiter((s.delta == delta_max for s in states), dtype=bool, count=len(states))
    return float(np.clip(np.sum(np.asarray(pi)[mask]), 0.0, 1.0))
