"""Core problem representation shared by every solver in the package.

An instance is a set of clients (each tagged with a demographic group) and a
set of candidate facilities with opening costs, embedded in Euclidean space.
Solutions open a subset of facilities, designate per-group outliers, and
assign every remaining client to its nearest open facility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

# Dense distance matrices are cached only below this clients*facilities size.
DENSE_CACHE_LIMIT = 5000 * 200

FACILITY_LOCATION = "facility_location"
K_MEDIAN = "k_median"


@dataclass(frozen=True)
class Point:
    """A location in d-dimensional Euclidean space."""

    coords: tuple[float, ...]

    def __post_init__(self):
        if len(self.coords) < 1:
            raise ValueError("point needs at least one coordinate")
        if not all(math.isfinite(c) for c in self.coords):
            raise ValueError(f"non-finite coordinate in {self.coords}")

    @property
    def dim(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class Client:
    point: Point
    group: int

    def __post_init__(self):
        if self.group < 0:
            raise ValueError("group index must be non-negative")


@dataclass(frozen=True)
class Facility:
    point: Point
    open_cost: float = 0.0

    def __post_init__(self):
        if not (self.open_cost >= 0.0):
            raise ValueError("opening cost must be non-negative")


@dataclass(frozen=True)
class MetricInstance:
    """Immutable clients + facilities with an l2 distance oracle.

    ``allowed_pairs``, when present, restricts which (facility, client)
    assignments the LP may use; every client keeps at least one allowed
    facility.  Distances are cached densely for instances below
    ``cache_limit`` client*facility entries and computed on demand above it.
    """

    clients: tuple[Client, ...]
    facilities: tuple[Facility, ...]
    allowed_pairs: Optional[frozenset[tuple[int, int]]] = None
    cache_limit: int = DENSE_CACHE_LIMIT

    def __post_init__(self):
        if not self.clients or not self.facilities:
            raise ValueError("need at least one client and one facility")
        object.__setattr__(self, "clients", tuple(self.clients))
        object.__setattr__(self, "facilities", tuple(self.facilities))
        dims = {c.point.dim for c in self.clients} | {f.point.dim for f in self.facilities}
        if len(dims) != 1:
            raise ValueError(f"mixed point dimensions: {sorted(dims)}")
        if self.allowed_pairs is not None:
            pairs = frozenset(self.allowed_pairs)
            object.__setattr__(self, "allowed_pairs", pairs)
            covered = set()
            for i, j in pairs:
                if not (0 <= i < len(self.facilities) and 0 <= j < len(self.clients)):
                    raise ValueError(f"pair ({i}, {j}) out of range")
                covered.add(j)
            if len(covered) != len(self.clients):
                missing = set(range(len(self.clients))) - covered
                raise ValueError(f"clients with no allowed facility: {sorted(missing)}")

    @classmethod
    def from_arrays(
        cls,
        client_coords: np.ndarray,
        groups: Sequence[int],
        facility_coords: np.ndarray,
        open_costs: Sequence[float],
        allowed_pairs: Optional[Iterable[tuple[int, int]]] = None,
        cache_limit: int = DENSE_CACHE_LIMIT,
    ) -> "MetricInstance":
        client_coords = np.asarray(client_coords, dtype=float)
        facility_coords = np.asarray(facility_coords, dtype=float)
        clients = tuple(
            Client(Point(tuple(row)), int(g)) for row, g in zip(client_coords, groups)
        )
        facilities = tuple(
            Facility(Point(tuple(row)), float(c)) for row, c in zip(facility_coords, open_costs)
        )
        pairs = None if allowed_pairs is None else frozenset(allowed_pairs)
        return cls(clients, facilities, pairs, cache_limit)

    @property
    def n_clients(self) -> int:
        return len(self.clients)

    @property
    def n_facilities(self) -> int:
        return len(self.facilities)

    @property
    def dim(self) -> int:
        return self.clients[0].point.dim

    @cached_property
    def groups(self) -> np.ndarray:
        return np.array([c.group for c in self.clients], dtype=np.int64)

    @cached_property
    def n_groups(self) -> int:
        return int(self.groups.max()) + 1

    @cached_property
    def group_members(self) -> tuple[np.ndarray, ...]:
        return tuple(np.flatnonzero(self.groups == g) for g in range(self.n_groups))

    @cached_property
    def client_coords(self) -> np.ndarray:
        return np.array([c.point.coords for c in self.clients], dtype=float)

    @cached_property
    def facility_coords(self) -> np.ndarray:
        return np.array([f.point.coords for f in self.facilities], dtype=float)

    @cached_property
    def open_costs(self) -> np.ndarray:
        return np.array([f.open_cost for f in self.facilities], dtype=float)

    @cached_property
    def _dense_distances(self) -> Optional[np.ndarray]:
        if self.n_clients * self.n_facilities > self.cache_limit:
            return None
        diff = self.facility_coords[:, None, :] - self.client_coords[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def distances(self) -> np.ndarray:
        """Full (facilities x clients) distance matrix."""
        cached = self._dense_distances
        if cached is not None:
            return cached
        diff = self.facility_coords[:, None, :] - self.client_coords[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def distance(self, facility: int, client: int) -> float:
        cached = self._dense_distances
        if cached is not None:
            return float(cached[facility, client])
        diff = self.facility_coords[facility] - self.client_coords[client]
        return float(np.sqrt(diff @ diff))

    def facility_distances(self, facility: int) -> np.ndarray:
        """Distances from one facility to every client."""
        cached = self._dense_distances
        if cached is not None:
            return cached[facility]
        diff = self.facility_coords[facility][None, :] - self.client_coords
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))

    @cached_property
    def pair_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Allowed (facility, client) pairs as parallel index arrays.

        Sorted client-major so that all pairs of one client are contiguous.
        Defaults to the full product when no pruning has been applied.
        """
        if self.allowed_pairs is None:
            cli = np.repeat(np.arange(self.n_clients), self.n_facilities)
            fac = np.tile(np.arange(self.n_facilities), self.n_clients)
            return fac, cli
        pairs = sorted(self.allowed_pairs, key=lambda p: (p[1], p[0]))
        fac = np.array([p[0] for p in pairs], dtype=np.int64)
        cli = np.array([p[1] for p in pairs], dtype=np.int64)
        return fac, cli


@dataclass(frozen=True)
class OutlierBudgets:
    """Per-group caps on how many clients may be dropped as outliers."""

    per_group: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "per_group", tuple(int(v) for v in self.per_group))
        if any(v < 0 for v in self.per_group):
            raise ValueError("outlier budgets must be non-negative")

    @property
    def total(self) -> int:
        return sum(self.per_group)

    def validate_for(self, inst: MetricInstance) -> None:
        if len(self.per_group) != inst.n_groups:
            raise ValueError(
                f"budget vector has {len(self.per_group)} entries, instance has "
                f"{inst.n_groups} groups"
            )
        for g, cap in enumerate(self.per_group):
            size = len(inst.group_members[g])
            if cap > size:
                raise ValueError(f"budget {cap} for group {g} exceeds its {size} clients")


@dataclass(frozen=True)
class IntegralSolution:
    """An integral solution: open facilities, per-group outliers, assignment.

    Every non-outlier client is assigned to its nearest open facility (ties
    broken toward the lowest facility index); cost fields are the sums the
    assignment induces.
    """

    open: frozenset[int]
    outliers: tuple[frozenset[int], ...]
    assignment: Mapping[int, int]
    facility_cost: float
    connection_cost: float

    @property
    def total_cost(self) -> float:
        return self.facility_cost + self.connection_cost

    def outlier_counts(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.outliers)


def nearest_open(inst: MetricInstance, open_facilities: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Per-client nearest facility among ``open_facilities``.

    Returns (distance, facility index) arrays; ties resolve to the lowest
    facility index.
    """
    order = np.sort(np.asarray(list(open_facilities), dtype=np.int64))
    if order.size == 0:
        raise ValueError("no open facilities")
    sub = inst.distances()[order]
    pos = np.argmin(sub, axis=0)  # first occurrence = lowest index after sort
    return sub[pos, np.arange(inst.n_clients)], order[pos]


def assign_nearest(
    inst: MetricInstance,
    open_facilities: Iterable[int],
    outliers: Sequence[Iterable[int]],
) -> IntegralSolution:
    """Build a valid IntegralSolution from an open set and outlier choice."""
    open_set = frozenset(int(i) for i in open_facilities)
    outlier_sets = tuple(frozenset(int(j) for j in grp) for grp in outliers)
    if len(outlier_sets) != inst.n_groups:
        raise ValueError("need one outlier set per group")
    dropped = set().union(*outlier_sets) if outlier_sets else set()
    served = [j for j in range(inst.n_clients) if j not in dropped]
    facility_cost = float(inst.open_costs[sorted(open_set)].sum()) if open_set else 0.0
    if not served:
        return IntegralSolution(open_set, outlier_sets, {}, facility_cost, 0.0)
    if not open_set:
        raise ValueError("no open facility but some clients are not outliers")
    dist, fac = nearest_open(inst, sorted(open_set))
    assignment = {j: int(fac[j]) for j in served}
    connection = float(sum(dist[j] for j in served))
    return IntegralSolution(open_set, outlier_sets, assignment, facility_cost, connection)


def solution_cost(inst: MetricInstance, sol: IntegralSolution, objective: str) -> float:
    """Recompute a solution's objective value from first principles.

    ``facility_location`` counts opening plus connection cost; ``k_median``
    counts connection cost only.  Raises if any client is assigned to a
    facility outside the open set.
    """
    if objective not in (FACILITY_LOCATION, K_MEDIAN):
        raise ValueError(f"unknown objective {objective!r}")
    for j, i in sol.assignment.items():
        if i not in sol.open:
            raise ValueError(f"client {j} assigned to closed facility {i}")
    connection = sum(inst.distance(i, j) for j, i in sol.assignment.items())
    if objective == K_MEDIAN:
        return float(connection)
    facility = float(inst.open_costs[sorted(sol.open)].sum()) if sol.open else 0.0
    return facility + float(connection)


def unfairness(budgets: OutlierBudgets, sol: IntegralSolution) -> float:
    """max(1, max_g used_g / allowed_g); +inf if a zero budget is exceeded."""
    worst = 1.0
    for cap, used_set in zip(budgets.per_group, sol.outliers):
        used = len(used_set)
        if used == 0:
            continue
        if cap == 0:
            return math.inf
        worst = max(worst, used / cap)
    return worst


def prune_pairs(inst: MetricInstance) -> MetricInstance:
    """Restrict assignment pairs to distances strictly below the median.

    The median is taken over the full facility-by-client distance multiset.
    A client whose every pair would be pruned keeps its single nearest
    facility (lowest index on ties) so downstream LPs stay feasible.
    """
    if inst.allowed_pairs is not None:
        raise ValueError("instance already has allowed_pairs")
    dist = inst.distances()
    median = float(np.median(dist))
    keep = dist < median
    stranded = np.flatnonzero(~keep.any(axis=0))
    nearest = np.argmin(dist[:, stranded], axis=0) if stranded.size else np.empty(0, int)
    keep[nearest, stranded] = True
    fac, cli = np.nonzero(keep)
    pairs = frozenset(zip(fac.tolist(), cli.tolist()))
    return MetricInstance(inst.clients, inst.facilities, pairs, inst.cache_limit)
