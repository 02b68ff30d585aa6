"""LP relaxation of facility location with group-capped outliers.

Variables: one assignment value per allowed (facility, client) pair, one
opening value per facility, one outlier value per client, all boxed to
[0, 1].  Rows: each client is covered (assigned or outliered), assignment
never exceeds opening, and outlier mass per group (or in total, for the
non-fair variant) stays within budget.

Solving is delegated to scipy's HiGHS backend, which is deterministic for a
fixed model; every solution is re-verified against the model by an
independent residual pass before being returned.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .instance import MetricInstance, OutlierBudgets, Point

PER_GROUP = "per_group"
AGGREGATE = "aggregate"

RESIDUAL_TOL = 1e-7


class LpError(RuntimeError):
    """Base class for LP solver failures."""


class InfeasibleError(LpError):
    pass


class UnboundedError(LpError):
    pass


class IterationLimitError(LpError):
    pass


@dataclass(frozen=True)
class LpModel:
    """Sparse LP in natural row senses ('G' for >=, 'L' for <=).

    Column layout: assignment variables for each allowed pair (client-major
    order, mirrored in ``pair_fac``/``pair_cli``), then one opening variable
    per facility, then one outlier variable per client.  Row layout: client
    coverage rows, pair capacity rows, then budget row(s).
    """

    c: np.ndarray
    a_matrix: sparse.csr_matrix
    senses: np.ndarray
    rhs: np.ndarray
    pair_fac: np.ndarray
    pair_cli: np.ndarray
    n_facilities: int
    n_clients: int
    n_budget_rows: int
    fairness: str

    @property
    def n_pairs(self) -> int:
        return len(self.pair_fac)

    @property
    def n_vars(self) -> int:
        return self.n_pairs + self.n_facilities + self.n_clients

    @property
    def n_rows(self) -> int:
        return self.n_clients + self.n_pairs + self.n_budget_rows

    def var_role(self, var: int) -> tuple:
        """('x', facility, client) | ('y', facility) | ('z', client)."""
        if var < 0 or var >= self.n_vars:
            raise IndexError(var)
        if var < self.n_pairs:
            return ("x", int(self.pair_fac[var]), int(self.pair_cli[var]))
        var -= self.n_pairs
        if var < self.n_facilities:
            return ("y", var)
        return ("z", var - self.n_facilities)

    def row_role(self, row: int) -> tuple:
        """('cover', client) | ('capacity', facility, client) | ('budget', group)."""
        if row < 0 or row >= self.n_rows:
            raise IndexError(row)
        if row < self.n_clients:
            return ("cover", row)
        row -= self.n_clients
        if row < self.n_pairs:
            return ("capacity", int(self.pair_fac[row]), int(self.pair_cli[row]))
        return ("budget", row - self.n_pairs)


@dataclass(frozen=True)
class FractionalSolution:
    """A feasible point of the relaxation with its objective value."""

    pair_fac: np.ndarray
    pair_cli: np.ndarray
    x_values: np.ndarray
    y: np.ndarray
    z: np.ndarray
    objective_value: float

    @cached_property
    def x(self) -> dict[tuple[int, int], float]:
        """Sparse (facility, client) -> assignment value map."""
        live = np.flatnonzero(self.x_values > 1e-12)
        return {
            (int(self.pair_fac[p]), int(self.pair_cli[p])): float(self.x_values[p])
            for p in live
        }

    def assignment_sums(self) -> np.ndarray:
        """Per-client total assignment mass (sum over allowed facilities)."""
        return np.bincount(self.pair_cli, weights=self.x_values, minlength=len(self.z))


def build_flfo_lp(
    inst: MetricInstance, budgets: OutlierBudgets, fairness: str = PER_GROUP
) -> LpModel:
    """Assemble the relaxation for an instance and budget vector.

    ``per_group`` emits one budget row per group; ``aggregate`` collapses
    them into a single row capping the total outlier mass, which is the
    non-fair baseline's model.
    """
    if fairness not in (PER_GROUP, AGGREGATE):
        raise ValueError(f"unknown fairness mode {fairness!r}")
    budgets.validate_for(inst)
    fac, cli = inst.pair_arrays
    n_pairs = len(fac)
    n, m = inst.n_clients, inst.n_facilities
    dist = inst.distances()

    c = np.concatenate([dist[fac, cli], inst.open_costs, np.zeros(n)])

    y_off = n_pairs
    z_off = n_pairs + m
    p_idx = np.arange(n_pairs)

    # coverage: sum_i x_ij + z_j >= 1
    rows = [cli, np.arange(n)]
    cols = [p_idx, z_off + np.arange(n)]
    data = [np.ones(n_pairs), np.ones(n)]
    # capacity: x_ij - y_i <= 0
    rows += [n + p_idx, n + p_idx]
    cols += [p_idx, y_off + fac]
    data += [np.ones(n_pairs), -np.ones(n_pairs)]
    # budgets on z
    if fairness == PER_GROUP:
        n_budget = inst.n_groups
        rows.append(n + n_pairs + inst.groups)
        budget_rhs = np.array(budgets.per_group, dtype=float)
    else:
        n_budget = 1
        rows.append(np.full(n, n + n_pairs))
        budget_rhs = np.array([budgets.total], dtype=float)
    cols.append(z_off + np.arange(n))
    data.append(np.ones(n))

    n_rows = n + n_pairs + n_budget
    a_matrix = sparse.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_rows, n_pairs + m + n),
    )
    senses = np.array(["G"] * n + ["L"] * (n_pairs + n_budget))
    rhs = np.concatenate([np.ones(n), np.zeros(n_pairs), budget_rhs])
    return LpModel(c, a_matrix, senses, rhs, fac, cli, m, n, n_budget, fairness)


def _verify_residuals(model: LpModel, values: np.ndarray) -> None:
    if values.min() < -RESIDUAL_TOL or values.max() > 1.0 + RESIDUAL_TOL:
        raise LpError("solution violates variable bounds beyond tolerance")
    lhs = model.a_matrix @ values
    geq = model.senses == "G"
    if np.any(lhs[geq] < model.rhs[geq] - RESIDUAL_TOL):
        worst = float((model.rhs[geq] - lhs[geq]).max())
        raise LpError(f"coverage residual {worst:.2e} beyond tolerance")
    leq = ~geq
    if np.any(lhs[leq] > model.rhs[leq] + RESIDUAL_TOL):
        worst = float((lhs[leq] - model.rhs[leq]).max())
        raise LpError(f"inequality residual {worst:.2e} beyond tolerance")


def solve_lp(model: LpModel, pivot_cap: Optional[int] = None) -> FractionalSolution:
    """Solve to optimality; deterministic for a fixed model.

    Raises InfeasibleError / UnboundedError / IterationLimitError on the
    corresponding solver statuses.  The returned point is checked against
    the model's rows within 1e-7 by a residual pass independent of the
    solver's own bookkeeping.
    """
    cap = pivot_cap if pivot_cap is not None else 50 * (model.n_rows + model.n_vars)
    sign = np.where(model.senses == "G", -1.0, 1.0)
    a_ub = model.a_matrix.multiply(sign[:, None]).tocsr()
    b_ub = sign * model.rhs
    res = linprog(
        model.c,
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=(0.0, 1.0),
        method="highs",
        options={
            "presolve": True,
            "maxiter": int(cap),
            "primal_feasibility_tolerance": 1e-9,
            "dual_feasibility_tolerance": 1e-9,
        },
    )
    if res.status == 1:
        raise IterationLimitError(f"pivot cap {cap} reached")
    if res.status == 2:
        raise InfeasibleError("budget rows make the relaxation infeasible")
    if res.status == 3:
        raise UnboundedError("relaxation reported unbounded")
    if res.status != 0:
        raise LpError(f"solver failed: {res.message}")
    values = np.asarray(res.x, dtype=float)
    _verify_residuals(model, values)
    n_pairs = model.n_pairs
    return FractionalSolution(
        pair_fac=model.pair_fac,
        pair_cli=model.pair_cli,
        x_values=values[:n_pairs],
        y=values[n_pairs : n_pairs + model.n_facilities],
        z=values[n_pairs + model.n_facilities :],
        objective_value=float(model.c @ values),
    )


def build_gap_instance(f: float, m_clients: int) -> tuple[MetricInstance, OutlierBudgets]:
    """One facility of cost f with ``m_clients`` co-located clients and a
    budget of all but one, the family whose relaxation is a factor
    ``m_clients`` below any integral solution."""
    if m_clients < 2:
        raise ValueError("need at least 2 clients")
    if not f > 0:
        raise ValueError("opening cost must be positive")
    from .instance import Client, Facility

    origin = Point((0.0,))
    inst = MetricInstance(
        clients=tuple(Client(origin, 0) for _ in range(m_clients)),
        facilities=(Facility(origin, float(f)),),
    )
    return inst, OutlierBudgets((m_clients - 1,))


def write_mps(model: LpModel, path: str, name: str = "FAIRFL") -> None:
    """Dump the model in fixed-format MPS for cross-checking with external
    solvers.  Rows are named R%07d by row id and columns C%07d by variable
    id; use ``LpModel.var_role``/``row_role`` to translate back."""
    sense_tag = {"G": " G", "L": " L"}
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"NAME          {name}\n")
        fh.write("ROWS\n")
        fh.write(" N  COST\n")
        for r in range(model.n_rows):
            fh.write(f"{sense_tag[str(model.senses[r])]}  R{r:07d}\n")
        fh.write("COLUMNS\n")
        a_csc = model.a_matrix.tocsc()
        for v in range(model.n_vars):
            entries = []
            if model.c[v] != 0.0:
                entries.append(("COST", model.c[v]))
            start, end = a_csc.indptr[v], a_csc.indptr[v + 1]
            for r, val in zip(a_csc.indices[start:end], a_csc.data[start:end]):
                entries.append((f"R{r:07d}", val))
            col = f"C{v:07d}"
            for k in range(0, len(entries), 2):
                chunk = entries[k : k + 2]
                line = f"    {col:<8}"
                for row_name, val in chunk:
                    line += f"  {row_name:<8}  {val:<12.8g}"
                fh.write(line.rstrip() + "\n")
        fh.write("RHS\n")
        for r in range(model.n_rows):
            if model.rhs[r] != 0.0:
                fh.write(f"    RHS       R{r:07d}  {model.rhs[r]:<12.8g}".rstrip() + "\n")
        fh.write("BOUNDS\n")
        for v in range(model.n_vars):
            fh.write(f" UP BND       C{v:07d}  1\n")
        fh.write("ENDATA\n")
