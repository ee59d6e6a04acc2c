"""Minimum-cost agent/request matching via a forward auction.

The auction runs on integers only: costs are rescaled so the classic
epsilon = 1/(n+1) bid increment becomes exactly 1, which makes the result
provably optimal for integer inputs without any floating point.  Rectangular
problems are padded with zero-cost dummies; infeasible pairs are encoded as
a cost large enough that the solver first maximizes the number of feasible
matches and only then minimizes their total cost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import auction_core
from .roadgraph import UNREACHABLE


class AssignmentError(ValueError):
    """Raised for malformed cost matrices."""


@dataclass(frozen=True)
class Assignment:
    """Partial matching agent index -> request index with its total cost."""

    pairs: dict[int, int]
    total_cost: int


def _as_cost_matrix(costs) -> np.ndarray:
    rows = costs.tolist() if isinstance(costs, np.ndarray) else [list(r) for r in costs]
    n_agents = len(rows)
    n_requests = len(rows[0]) if rows else 0
    out = np.empty((n_agents, n_requests), dtype=np.int64)
    for i, row in enumerate(rows):
        if len(row) != n_requests:
            raise AssignmentError("cost matrix rows must all have the same length")
        for j, v in enumerate(row):
            fv = float(v)
            if math.isnan(fv):
                raise AssignmentError("cost entries must not be NaN")
            if math.isinf(fv):
                out[i, j] = UNREACHABLE
                continue
            iv = int(fv)
            if iv != fv:
                raise AssignmentError(f"cost entries must be integers, got {v!r}")
            if iv < 0 and iv != UNREACHABLE:
                raise AssignmentError(
                    f"negative cost {iv} (use UNREACHABLE / inf for infeasible pairs)"
                )
            out[i, j] = iv
    return out


def auction_assign(costs) -> Assignment:
    """Minimum-total-cost maximal matching of agents (rows) to requests.

    Entries are non-negative integer hop counts; ``UNREACHABLE`` (-1) or
    ``inf`` marks an infeasible pair.  The surplus side of a rectangular
    matrix is left unassigned.  Exact for integer costs.
    """
    mat = _as_cost_matrix(costs)
    n_agents, n_requests = mat.shape
    if n_agents == 0 or n_requests == 0:
        return Assignment(pairs={}, total_cost=0)
    n = max(n_agents, n_requests)
    prices = np.empty(n, dtype=np.int64)
    owner = np.empty(n, dtype=np.int64)
    task_of = np.empty(n, dtype=np.int64)
    queue = np.empty(2 * n, dtype=np.int64)
    auction_core(mat, n_agents, n_requests, prices, owner, task_of, queue)
    pairs = {
        i: int(task_of[i])
        for i in range(n_agents)
        if 0 <= task_of[i] < n_requests and mat[i, task_of[i]] >= 0
    }
    total = sum(int(mat[i, j]) for i, j in pairs.items())
    return Assignment(pairs=pairs, total_cost=total)
