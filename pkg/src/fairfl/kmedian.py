"""k-median with group-fair outliers via a penalty reduction.

The fair variant guesses the optimal service cost on a geometric grid,
encodes each group's outlier budget as a per-client penalty inversely
proportional to that budget, and solves every resulting k-median-with-
penalties instance by single-swap local search.  Non-fair baselines reuse
the same machinery with a single merged budget, or skip penalties entirely
and drop the farthest clients after a plain k-median search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .instance import IntegralSolution, MetricInstance, OutlierBudgets, assign_nearest


@dataclass(frozen=True)
class PenaltyInstance:
    """k-median where each client may opt out by paying its penalty.

    Penalties are non-negative and may be +inf, which marks a client that
    must always be served.
    """

    base: MetricInstance
    k: int
    penalty: np.ndarray

    def __post_init__(self):
        if not (1 <= self.k <= self.base.n_facilities):
            raise ValueError(f"k={self.k} outside [1, {self.base.n_facilities}]")
        pen = np.asarray(self.penalty, dtype=float)
        if pen.shape != (self.base.n_clients,):
            raise ValueError("need one penalty per client")
        if np.any(np.isnan(pen)) or np.any(pen < 0):
            raise ValueError("penalties must be non-negative and not NaN")
        object.__setattr__(self, "penalty", pen)


@dataclass(frozen=True)
class PenaltySolution:
    """Open set plus the canonical serve-or-pay split it induces.

    A client pays exactly when its penalty is strictly below its distance
    to the nearest open facility; everyone else is served by that facility.
    """

    open: frozenset[int]
    paying: frozenset[int]
    assignment: Mapping[int, int]
    service_cost: float
    penalty_paid: float

    @property
    def total_cost(self) -> float:
        return self.service_cost + self.penalty_paid


@dataclass(frozen=True)
class GuessGrid:
    """Geometric candidate values lo * ratio^t covering [lo, hi]."""

    lo: float
    hi: float
    ratio: float
    values: tuple[float, ...]


def _two_nearest(dist: np.ndarray, open_list: Sequence[int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nearest and second-nearest open distances per client.

    Ties resolve toward the lowest facility index.  Second distance is +inf
    when only one facility is open.
    """
    rows = np.asarray(sorted(open_list), dtype=np.int64)
    sub = dist[rows]
    n = dist.shape[1]
    if len(rows) == 1:
        return sub[0].copy(), np.full(n, rows[0]), np.full(n, np.inf)
    order = np.argsort(sub, axis=0, kind="stable")
    cols = np.arange(n)
    d1 = sub[order[0], cols]
    d2 = sub[order[1], cols]
    return d1, rows[order[0]], d2


def _canonical_solution(pinst: PenaltyInstance, open_list: Sequence[int]) -> PenaltySolution:
    dist = pinst.base.distances()
    d1, a1, _ = _two_nearest(dist, open_list)
    pays = pinst.penalty < d1  # ties serve
    paying = frozenset(np.flatnonzero(pays).tolist())
    assignment = {int(j): int(a1[j]) for j in np.flatnonzero(~pays)}
    service = float(d1[~pays].sum())
    paid = float(pinst.penalty[pays].sum())
    return PenaltySolution(frozenset(int(i) for i in open_list), paying, assignment, service, paid)


def local_search_penalties(pinst: PenaltyInstance, improve_frac: float = 0.01) -> PenaltySolution:
    """Single-swap local search on the serve-or-pay objective.

    Starts from the k lowest-index facilities and scans swaps in
    lexicographic (outgoing, incoming) order, accepting the first swap that
    cuts the current cost by at least ``improve_frac`` of itself; stops when
    a full scan finds none.
    """
    if not (0 < improve_frac < 1):
        raise ValueError("improve_frac must be in (0, 1)")
    dist = pinst.base.distances()
    m = pinst.base.n_facilities
    pen = pinst.penalty
    open_list = list(range(pinst.k))
    d1, a1, d2 = _two_nearest(dist, open_list)
    cost = float(np.minimum(d1, pen).sum())
    start_cost = cost
    accepted = 0

    improved = True
    while improved:
        improved = False
        open_sorted = sorted(open_list)
        closed = np.array([i for i in range(m) if i not in set(open_list)], dtype=np.int64)
        if closed.size == 0:
            break
        for f_out in open_sorted:
            base_d = np.where(a1 == f_out, d2, d1)
            cand = np.minimum(base_d[None, :], dist[closed])
            cand_cost = np.minimum(cand, pen[None, :]).sum(axis=1)
            hits = np.flatnonzero((cand_cost <= cost * (1.0 - improve_frac)) & (cand_cost < cost))
            if hits.size:
                f_in = int(closed[hits[0]])
                open_list = sorted(set(open_list) - {f_out} | {f_in})
                d1, a1, d2 = _two_nearest(dist, open_list)
                cost = float(np.minimum(d1, pen).sum())
                accepted += 1
                improved = True
                break

    if accepted and cost > 0:
        # each accepted swap shrinks cost by factor <= (1 - improve_frac)
        bound = math.log(start_cost / cost) / math.log(1.0 / (1.0 - improve_frac))
        assert accepted <= bound + 1e-6, f"{accepted} swaps exceeds decay bound {bound:.3f}"
    return _canonical_solution(pinst, open_list)


def make_penalties(
    inst: MetricInstance,
    budgets: OutlierBudgets,
    k: int,
    guess_cost: float,
    gamma: float,
) -> PenaltyInstance:
    """Penalty instance with p_j = guess_cost / (gamma * budget of j's group).

    Groups with a zero budget get +inf so their clients can never pay.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    budgets.validate_for(inst)
    caps = np.array(budgets.per_group, dtype=float)
    per_group = np.where(caps > 0, guess_cost / (gamma * np.maximum(caps, 1e-300)), np.inf)
    return PenaltyInstance(inst, k, per_group[inst.groups])


def _grid_from_totals(inst: MetricInstance, total_budget: int, eps_guess: float) -> GuessGrid:
    if not eps_guess > 0:
        raise ValueError("eps_guess must be positive")
    n = inst.n_clients
    if total_budget > n:
        raise ValueError("total budget exceeds client count")
    served = n - total_budget
    dist = inst.distances()
    positive = dist[dist > 0]
    if served == 0 or positive.size == 0:
        return GuessGrid(0.0, 0.0, 1.0 + eps_guess, (0.0,))
    lo = served * float(positive.min())
    hi = served * float(dist.max())
    values = [lo]
    v = lo
    while v < hi * (1.0 - 1e-12):
        v *= 1.0 + eps_guess
        values.append(v)
    return GuessGrid(lo, hi, 1.0 + eps_guess, tuple(values))


def build_guess_grid(inst: MetricInstance, budgets: OutlierBudgets, eps_guess: float) -> GuessGrid:
    """Grid of candidate service costs bracketing the optimum.

    Bounds follow from every served client contributing between the
    smallest positive and the largest facility-client distance.
    """
    budgets.validate_for(inst)
    return _grid_from_totals(inst, budgets.total, eps_guess)


def _penalties_for(groups: np.ndarray, caps: Sequence[int], guess: float, gamma: float) -> np.ndarray:
    caps_arr = np.array(caps, dtype=float)
    per_group = np.where(caps_arr > 0, guess / (gamma * np.maximum(caps_arr, 1e-300)), np.inf)
    return per_group[groups]


def _reduce_and_search(
    inst: MetricInstance,
    groups: np.ndarray,
    caps: Sequence[int],
    k: int,
    gamma: float,
    eps_guess: float,
    improve_frac: float,
) -> PenaltySolution:
    """Run the guess grid and pick a winner.

    A candidate is admissible when every group's outlier count stays within
    (n_groups + gamma) times its cap; the cheapest admissible candidate by
    service cost wins, falling back to the smallest violation ratio (then
    cost) when none is admissible.  Ties resolve to the earliest grid value.
    """
    n_groups = len(caps)
    grid = _grid_from_totals(inst, int(sum(caps)), eps_guess)
    slack = n_groups + gamma
    best = None  # (feasible-rank, primary, secondary, grid index, solution)
    for t, guess in enumerate(grid.values):
        pinst = PenaltyInstance(inst, k, _penalties_for(groups, caps, guess, gamma))
        psol = local_search_penalties(pinst, improve_frac)
        counts = np.bincount(groups[sorted(psol.paying)], minlength=n_groups) if psol.paying else np.zeros(n_groups, dtype=int)
        viol = 0.0
        for g in range(n_groups):
            if counts[g] == 0:
                continue
            viol = max(viol, counts[g] / (slack * caps[g]))
        key = (
            (0, psol.service_cost, viol, t, psol)
            if viol <= 1.0
            else (1, viol, psol.service_cost, t, psol)
        )
        if best is None or key[:4] < best[:4]:
            best = key
    assert best is not None
    return best[4]


def _to_integral(inst: MetricInstance, psol: PenaltySolution) -> IntegralSolution:
    outliers = [set() for _ in range(inst.n_groups)]
    for j in psol.paying:
        outliers[int(inst.groups[j])].add(j)
    return assign_nearest(inst, psol.open, outliers)


def r_ls_f(
    inst: MetricInstance,
    budgets: OutlierBudgets,
    k: int,
    gamma: Optional[float] = None,
    eps_guess: float = 0.5,
    improve_frac: float = 0.01,
) -> IntegralSolution:
    """Fair k-median: penalty reduction per group plus local search."""
    budgets.validate_for(inst)
    if gamma is None:
        gamma = eps_guess
    psol = _reduce_and_search(
        inst, inst.groups, budgets.per_group, k, gamma, eps_guess, improve_frac
    )
    return _to_integral(inst, psol)


def r_ls_nf(
    inst: MetricInstance,
    total_budget: int,
    k: int,
    gamma: Optional[float] = None,
    eps_guess: float = 0.5,
    improve_frac: float = 0.01,
) -> IntegralSolution:
    """Non-fair baseline: same reduction with one merged outlier budget."""
    if not 0 <= total_budget <= inst.n_clients:
        raise ValueError("total budget out of range")
    if gamma is None:
        gamma = eps_guess
    merged = np.zeros(inst.n_clients, dtype=np.int64)
    psol = _reduce_and_search(inst, merged, (total_budget,), k, gamma, eps_guess, improve_frac)
    return _to_integral(inst, psol)


def ls_nf(
    inst: MetricInstance,
    total_budget: int,
    k: int,
    improve_frac: float = 0.01,
) -> IntegralSolution:
    """Plain k-median local search, then drop the farthest clients.

    The ``total_budget`` clients farthest from their nearest open facility
    become outliers (ties toward the lower client index); the reported cost
    excludes them.
    """
    if not 0 <= total_budget <= inst.n_clients:
        raise ValueError("total budget out of range")
    pinst = PenaltyInstance(inst, k, np.full(inst.n_clients, np.inf))
    psol = local_search_penalties(pinst, improve_frac)
    d1, _, _ = _two_nearest(inst.distances(), sorted(psol.open))
    order = np.lexsort((np.arange(inst.n_clients), -d1))
    dropped = order[:total_budget]
    outliers = [set() for _ in range(inst.n_groups)]
    for j in dropped:
        outliers[int(inst.groups[j])].add(int(j))
    return assign_nearest(inst, psol.open, outliers)
