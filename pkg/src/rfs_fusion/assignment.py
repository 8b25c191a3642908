"""Ranked (k-best) assignment by Murty's partitioning method.

The inner optimal assignments are solved with
:func:`scipy.optimize.linear_sum_assignment`.  Forbidden pairs are marked with
``np.inf`` in the cost matrix.
"""
from __future__ import annotations

import heapq
from itertools import count

import numpy as np
from scipy.optimize import linear_sum_assignment


def _solve(cost: np.ndarray, rows: np.ndarray, cols: np.ndarray, excluded: tuple):
    """Best assignment with row ``rows[t]`` fixed to ``cols[t]`` and ``excluded`` pairs forbidden.

    Returns ``(total, assignment)`` or ``None`` when infeasible.  Fixed rows
    keep only their column, which is then closed to every other row.
    """
    sub = cost.copy()
    if rows.size:
        keep = cost[rows, cols]
        sub[:, cols] = np.inf
        sub[rows, :] = np.inf
        sub[rows, cols] = keep
    for r, c in excluded:
        sub[r, c] = np.inf
    try:
        ri, ci = linear_sum_assignment(sub)
    except ValueError:
        return None
    total = sub[ri, ci].sum()
    if total == np.inf:
        return None
    return float(total), ci


def murty(cost: np.ndarray, k: int, max_cost_gap: float = np.inf) -> list[tuple[float, np.ndarray]]:
    """The ``k`` lowest-cost complete row assignments of ``cost``.

    Parameters
    ----------
    cost : (n, m) array with n <= m
        Assignment costs; ``np.inf`` forbids a pair.
    k : int
        Maximum number of solutions.
    max_cost_gap : float
        Stop once a solution's cost exceeds the best cost by more than this.

    Returns
    -------
    list of (total_cost, assignment)
        ``assignment[i]`` is the column of row ``i``; costs are nondecreasing.
    """
    cost = np.asarray(cost, dtype=float)
    n, m = cost.shape
    if n > m:
        raise ValueError("murty needs at least as many columns as rows")
    if k < 1:
        return []
    if n == 0:
        return [(0.0, np.empty(0, dtype=int))]
    none = np.empty(0, dtype=int)
    first = _solve(cost, none, none, ())
    if first is None:
        return []
    limit = first[0] + max_cost_gap
    tie = count()
    # node: (cost, tiebreak, assignment, fixed row mask, exclusions)
    heap = [(first[0], next(tie), first[1], np.zeros(n, dtype=bool), ())]
    out: list[tuple[float, np.ndarray]] = []
    while heap and len(out) < k:
        total, _, assign, fixed, excl = heapq.heappop(heap)
        if total > limit:
            break
        out.append((total, assign))
        if len(out) == k:
            break
        mask = fixed.copy()
        for i in np.flatnonzero(~fixed):
            rows = np.flatnonzero(mask)
            # inherited exclusions only matter on rows that are still free
            child_excl = tuple(e for e in excl if not mask[e[0]]) + ((i, assign[i]),)
            sol = _solve(cost, rows, assign[rows], child_excl)
            if sol is not None and sol[0] <= limit:
                heapq.heappush(heap, (sol[0], next(tie), sol[1], mask.copy(), child_excl))
            mask[i] = True
    return out


class _Budget(Exception):
    pass


def kbest_assignments(cost: np.ndarray, k: int, max_cost_gap: float = np.inf, node_budget: int = 200_000):
    """Same contract as :func:`murty`, tuned for sparse cost matrices.

    The optimum is found with one assignment solve; the ``k`` best solutions
    within ``max_cost_gap`` of it are then enumerated depth first, bounding
    each partial assignment by the cheapest remaining entry of every open row
    (column conflicts ignored).  If the search visits more than
    ``node_budget`` nodes, the problem is handed to :func:`murty` instead.
    """
    cost = np.asarray(cost, dtype=float)
    n, m = cost.shape
    if n > m:
        raise ValueError("murty needs at least as many columns as rows")
    if k < 1:
        return []
    if n == 0:
        return [(0.0, np.empty(0, dtype=int))]
    none = np.empty(0, dtype=int)
    first = _solve(cost, none, none, ())
    if first is None:
        return []
    limit = first[0] + max_cost_gap
    # cheap-first options per row; rows with the most negative optimum go first
    options = []
    for i in range(n):
        cols = np.flatnonzero(np.isfinite(cost[i]))
        order = np.argsort(cost[i, cols], kind="stable")
        options.append([(float(cost[i, c]), int(c)) for c in cols[order]])
    row_order = sorted(range(n), key=lambda i: options[i][0][0])
    opts = [options[i] for i in row_order]
    suffix = [0.0] * (n + 1)
    for d in range(n - 1, -1, -1):
        suffix[d] = suffix[d + 1] + opts[d][0][0]

    found: list = []  # max-heap on cost via negation
    used: set = set()
    chosen = [0] * n
    tie = count()
    visits = [0]
    # guard against round-off making the optimum itself look out of range
    cap = limit + 1e-9 * (1.0 + abs(first[0]))
    thr = [cap]

    def descend(d, acc):
        visits[0] += 1
        if visits[0] > node_budget:
            raise _Budget
        if d == n:
            item = (-acc, -next(tie), tuple(chosen))
            if len(found) < k:
                heapq.heappush(found, item)
            elif acc < -found[0][0]:
                heapq.heapreplace(found, item)
            if len(found) == k:
                thr[0] = min(cap, -found[0][0])
            return
        rest = suffix[d + 1]
        for c, col in opts[d]:
            if acc + c + rest > thr[0]:
                break
            if col in used:
                continue
            used.add(col)
            chosen[d] = col
            descend(d + 1, acc + c)
            used.discard(col)

    try:
        descend(0, 0.0)
    except _Budget:
        return murty(cost, k, max_cost_gap)
    out = []
    for negc, negt, ch in sorted(found, key=lambda t: (-t[0], -t[1])):
        assign = np.empty(n, dtype=int)
        assign[row_order] = ch
        out.append((-negc, assign))
    return out
