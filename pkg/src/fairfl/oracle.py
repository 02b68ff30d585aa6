"""Exhaustive reference solvers for small instances.

These enumerate facility subsets outright and exist purely as ground truth
for tests and tiny CLI runs; they refuse instances above the size guard
rather than approximate.
"""

from __future__ import annotations

from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .instance import IntegralSolution, MetricInstance, OutlierBudgets, assign_nearest
from .kmedian import PenaltyInstance, PenaltySolution, _canonical_solution

SIZE_GUARD = 20


def _check_guard(inst: MetricInstance) -> None:
    if inst.n_facilities > SIZE_GUARD:
        raise ValueError(
            f"{inst.n_facilities} facilities exceeds the enumeration guard of {SIZE_GUARD}"
        )


def _drop_farthest(
    group_members: Sequence[np.ndarray], nearest: np.ndarray, budgets: OutlierBudgets
) -> tuple[float, list[list[int]]]:
    """Optimal outliers for a fixed open set: per group, the clients
    farthest from it (ties toward the lower client index).  Returns the kept
    connection cost and the per-group dropped clients."""
    kept = 0.0
    dropped: list[list[int]] = []
    for members, cap in zip(group_members, budgets.per_group):
        vals = nearest[members]
        if cap == 0:
            kept += float(vals.sum())
            dropped.append([])
            continue
        order = np.lexsort((members, -vals))
        dropped.append([int(members[q]) for q in order[:cap]])
        kept += float(vals[order[cap:]].sum())
    return kept, dropped


def _all_droppable(inst: MetricInstance, budgets: OutlierBudgets) -> bool:
    return all(
        cap >= len(members) for cap, members in zip(budgets.per_group, inst.group_members)
    )


def exact_flfo(inst: MetricInstance, budgets: OutlierBudgets) -> IntegralSolution:
    """Brute-force optimum for facility location with per-group outliers.

    Walks all facility subsets in Gray-code order, maintaining each client's
    distance to the current subset incrementally; for a fixed subset the
    best outliers are the per-group farthest clients.  Cost ties resolve to
    the lexicographically smallest open set.
    """
    _check_guard(inst)
    budgets.validate_for(inst)
    dist = inst.distances()
    n, m = inst.n_clients, inst.n_facilities
    members = inst.group_members

    best_cost = np.inf
    best_subset: Optional[tuple[int, ...]] = None
    if _all_droppable(inst, budgets):
        best_cost = 0.0
        best_subset = ()

    nearest = np.full(n, np.inf)
    open_rows: list[int] = []
    f_sum = 0.0
    for step in range(1, 1 << m):
        bit = (step & -step).bit_length() - 1
        if bit in open_rows:
            open_rows.remove(bit)
            f_sum -= inst.open_costs[bit]
            affected = dist[bit] <= nearest
            if open_rows:
                nearest[affected] = dist[np.asarray(open_rows)][:, affected].min(axis=0)
            else:
                nearest[affected] = np.inf
        else:
            open_rows.append(bit)
            f_sum += inst.open_costs[bit]
            nearest = np.minimum(nearest, dist[bit])
        kept, _ = _drop_farthest(members, nearest, budgets)
        cost = f_sum + kept
        subset = tuple(sorted(open_rows))
        if cost < best_cost - 1e-12 or (
            abs(cost - best_cost) <= 1e-12 * max(1.0, abs(best_cost))
            and (best_subset is None or subset < best_subset)
        ):
            best_cost = cost
            best_subset = subset

    assert best_subset is not None, "no feasible subset (budgets leave a client unservable)"
    return _rebuild(inst, budgets, best_subset)


def _rebuild(
    inst: MetricInstance, budgets: OutlierBudgets, subset: tuple[int, ...]
) -> IntegralSolution:
    if subset:
        nearest = inst.distances()[np.asarray(subset)].min(axis=0)
    else:
        nearest = np.full(inst.n_clients, np.inf)
    _, dropped = _drop_farthest(inst.group_members, nearest, budgets)
    return assign_nearest(inst, subset, dropped)


def exact_kmfo(inst: MetricInstance, budgets: OutlierBudgets, k: int) -> IntegralSolution:
    """Brute-force optimum for k-median with per-group outliers."""
    _check_guard(inst)
    budgets.validate_for(inst)
    if not 1 <= k <= inst.n_facilities:
        raise ValueError(f"k={k} outside [1, {inst.n_facilities}]")
    dist = inst.distances()
    members = inst.group_members

    best_cost = np.inf
    best_subset: Optional[tuple[int, ...]] = None
    if _all_droppable(inst, budgets):
        best_cost = 0.0
        best_subset = ()
    for size in range(1, k + 1):
        for subset in combinations(range(inst.n_facilities), size):
            nearest = dist[np.asarray(subset)].min(axis=0)
            kept, _ = _drop_farthest(members, nearest, budgets)
            if kept < best_cost - 1e-12 or (
                abs(kept - best_cost) <= 1e-12 * max(1.0, abs(best_cost))
                and (best_subset is None or subset < best_subset)
            ):
                best_cost = kept
                best_subset = subset
    assert best_subset is not None
    return _rebuild(inst, budgets, best_subset)


def exact_kmp(pinst: PenaltyInstance) -> PenaltySolution:
    """Brute-force optimum for k-median with penalties.

    Every subset of at most k facilities is scored as the sum over clients
    of min(distance to subset, penalty); the empty set means everyone pays.
    """
    _check_guard(pinst.base)
    dist = pinst.base.distances()
    pen = pinst.penalty

    best_cost = float(pen.sum())  # empty open set
    best_subset: tuple[int, ...] = ()
    for size in range(1, pinst.k + 1):
        for subset in combinations(range(pinst.base.n_facilities), size):
            nearest = dist[np.asarray(subset)].min(axis=0)
            cost = float(np.minimum(nearest, pen).sum())
            if cost < best_cost - 1e-12 or (
                abs(cost - best_cost) <= 1e-12 * max(1.0, abs(best_cost))
                and subset < best_subset
            ):
                best_cost = cost
                best_subset = subset
    if not best_subset:
        paying = frozenset(range(pinst.base.n_clients))
        return PenaltySolution(frozenset(), paying, {}, 0.0, float(pen.sum()))
    return _canonical_solution(pinst, best_subset)
