"""Model builders: partial-path columns, the compact arc-flow LP, the
step-budgeted restricted master problems, dual extraction and reduced
costs.

A column is a partial path over the instance graph traversing exactly p
arcs, except that paths starting at the depot origin may traverse any
1..p arcs.  Its master coefficients are the visit vector e (1 for every
visited node that is not the path's last), the endpoint vector a (+1 at
the first node, -1 at the last, the sink entry dropped) and one
(q_j + Q) entry per traversed arc in the load-propagation rows (plus the
analogous service-start entries in time-window mode).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import lp as lpmod
from .instance import Instance
from .lp import EQUAL, GREATER, LESS, LinearProgram, LpSolution


class ColumnError(ValueError):
    """A path that cannot become a column; message names the rule."""


class ElementarityViolation(ColumnError):
    pass


class StepCountViolation(ColumnError):
    pass


class CapacityViolation(ColumnError):
    pass


class TimeWindowViolation(ColumnError):
    pass


class StructureViolation(ColumnError):
    """Bad node placement or an illegal arc."""


class PoolError(ValueError):
    """A pooled column does not fit the master it was offered to."""


class ModelStateError(RuntimeError):
    """Operation requires an optimal solution that was not supplied."""


@dataclass(frozen=True)
class PStepColumn:
    """A feasible k-step partial path and its master-row data.

    e and a are indexed 0..n (the sink never carries a coefficient);
    phi_cum[t] is the demand accumulated along the path up to and
    including position t.
    """

    path: Tuple[int, ...]
    k: int
    first: int
    last: int
    cost: float
    q_s: float
    e: Tuple[int, ...]
    a: Tuple[int, ...]
    phi_cum: Tuple[float, ...]

    def arcs(self) -> List[Tuple[int, int]]:
        return list(zip(self.path[:-1], self.path[1:]))

    def __str__(self):
        return "-".join(str(v) for v in self.path)


@dataclass(frozen=True)
class ArtificialColumn:
    """Feasibility placeholder: coefficient 1 in one partition row only."""

    customer: int
    cost: float


PoolEntry = Union[PStepColumn, ArtificialColumn]


def column_from_path(inst: Instance, path: Sequence[int], p: int) -> PStepColumn:
    """Validate a node sequence and populate its column data.

    Raises a ColumnError subclass naming the violated rule.  Time-window
    feasibility (earliest-arrival propagation from the first node's
    window opening) is enforced whenever the instance carries windows.
    """
    path = tuple(int(v) for v in path)
    n, sink = inst.n, inst.sink
    if len(path) < 2:
        raise StructureViolation(f"path {path} has no arcs")
    for v in path:
        if not 0 <= v <= sink:
            raise StructureViolation(f"node {v} out of range")
    if 0 in path[1:]:
        raise StructureViolation("origin depot only allowed in first position")
    if sink in path[:-1]:
        raise StructureViolation("sink depot only allowed in last position")
    if len(set(path)) != len(path):
        raise ElementarityViolation(f"repeated node in {path}")
    if path == (0, sink):
        raise StructureViolation("empty route arc origin->sink is excluded")
    k = len(path) - 1
    if not 1 <= p <= n + 1:
        raise StepCountViolation(f"step size {p} outside 1..{n + 1}")
    if k > p:
        raise StepCountViolation(f"{k} arcs exceed the budget {p}")
    if k < p and path[0] != 0:
        raise StepCountViolation(
            f"{k}-arc path may fall short of {p} only when starting at the depot"
        )
    total_demand = float(sum(inst.q[v] for v in path))
    if total_demand > inst.Q + 1e-9:
        raise CapacityViolation(
            f"visited demand {total_demand} exceeds capacity {inst.Q}"
        )
    if inst.has_tw:
        t = inst.tw[path[0], 0]
        for i, j in zip(path[:-1], path[1:]):
            t = max(inst.tw[j, 0], t + inst.s[i] + inst.t[i, j])
            if t > inst.tw[j, 1] + 1e-9:
                raise TimeWindowViolation(
                    f"earliest arrival {t:.6g} misses window of node {j}"
                )
    cost = float(sum(inst.c[i, j] for i, j in zip(path[:-1], path[1:])))
    e = [0] * (n + 1)
    a = [0] * (n + 1)
    for v in path[:-1]:
        if v <= n:
            e[v] = 1
    a[path[0]] = 1
    if path[-1] <= n:
        a[path[-1]] = -1
    cum = []
    running = 0.0
    for v in path:
        running += float(inst.q[v])
        cum.append(running)
    return PStepColumn(
        path=path,
        k=k,
        first=path[0],
        last=path[-1],
        cost=cost,
        q_s=total_demand - float(inst.q[path[0]]),
        e=tuple(e),
        a=tuple(a),
        phi_cum=tuple(cum),
    )


# ---------------------------------------------------------------------------
# Compact arc-flow model


@dataclass
class CompactModel:
    """Two-index arc-flow LP relaxation with index maps into the LP."""

    inst: Instance
    tw: bool
    lp: LinearProgram
    x_col: Dict[Tuple[int, int], int]
    y_col: Dict[int, int]
    w_col: Dict[int, int]


def build_vf_model(inst: Instance, tw: bool = False) -> CompactModel:
    """Arc variables with out-degree, flow-balance, fleet and big-M
    load-propagation rows; x relaxed to [0,1].

    The full (n+2)^2 arc grid is materialized; structurally impossible
    arcs (diagonal, into the origin, out of the sink, origin->sink) are
    fixed to zero.
    """
    if tw and not inst.has_tw:
        raise ValueError("time-window mode requires an instance with windows")
    n, sink, nn = inst.n, inst.sink, inst.n + 2
    x_col = {(i, j): i * nn + j for i in range(nn) for j in range(nn)}
    nx = nn * nn
    y_col = {i: nx + i for i in range(nn)}
    ncols = nx + nn
    w_col = {}
    if tw:
        w_col = {i: ncols + i for i in range(nn)}
        ncols += nn

    costs = np.zeros(ncols)
    lower = np.zeros(ncols)
    upper = np.zeros(ncols)
    for (i, j), col in x_col.items():
        costs[col] = inst.c[i, j]
        upper[col] = 1.0 if inst.is_legal_arc(i, j) else 0.0
    for i in range(nn):
        lower[y_col[i]] = inst.q[i]
        upper[y_col[i]] = inst.Q
        if tw:
            lower[w_col[i]] = inst.tw[i, 0]
            upper[w_col[i]] = inst.tw[i, 1]

    rows = []
    for i in inst.customers():
        rows.append((EQUAL, 1.0, {x_col[i, j]: 1.0
                                  for j in range(1, sink + 1) if j != i}))
    for h in inst.customers():
        coefs = {x_col[i, h]: 1.0 for i in range(0, n + 1) if i != h}
        for j in range(1, sink + 1):
            if j != h:
                coefs[x_col[h, j]] = coefs.get(x_col[h, j], 0.0) - 1.0
        rows.append((EQUAL, 0.0, coefs))
    rows.append((LESS, float(inst.K), {x_col[0, j]: 1.0 for j in inst.customers()}))
    for (i, j) in inst.legal_arcs():
        rows.append((LESS, inst.Q, {
            y_col[i]: 1.0, y_col[j]: -1.0, x_col[i, j]: inst.q[j] + inst.Q,
        }))
    if tw:
        for (i, j) in inst.legal_arcs():
            m_ij = inst.big_m(i, j)
            rows.append((LESS, m_ij, {
                w_col[i]: 1.0, w_col[j]: -1.0,
                x_col[i, j]: inst.s[i] + inst.t[i, j] + m_ij,
            }))

    program = lpmod.build_lp(costs, rows, bounds=list(zip(lower, upper)))
    return CompactModel(inst=inst, tw=tw, lp=program, x_col=x_col,
                        y_col=y_col, w_col=w_col)


# ---------------------------------------------------------------------------
# Restricted master problem


@dataclass
class MasterModel:
    """RMP over a pool of partial-path columns.

    Row layout: partition (one per customer), flow balance (one per
    customer), fleet, load propagation (one per legal arc), and in
    time-window mode service-start propagation (one per legal arc).
    Variable layout: phi block, optional omega block, then one lambda
    per pool entry in pool order.
    """

    inst: Instance
    p: int
    tw: bool
    lp: LinearProgram
    part_row: Dict[int, int]
    flow_row: Dict[int, int]
    fleet_row: int
    cap_row: Dict[Tuple[int, int], int]
    tw_row: Dict[Tuple[int, int], int]
    phi_col: Dict[int, int]
    omega_col: Dict[int, int]
    pool: List[PoolEntry] = field(default_factory=list)
    lam_cols: List[int] = field(default_factory=list)

    def pool_paths(self) -> set:
        return {c.path for c in self.pool if isinstance(c, PStepColumn)}

    def column_entries(self, entry: PoolEntry) -> Tuple[float, dict]:
        """(cost, {row: coef}) for one pool entry."""
        if isinstance(entry, ArtificialColumn):
            return entry.cost, {self.part_row[entry.customer]: 1.0}
        coefs: Dict[int, float] = {}
        for i in self.inst.customers():
            if entry.e[i]:
                coefs[self.part_row[i]] = 1.0
            if entry.a[i]:
                coefs[self.flow_row[i]] = float(entry.a[i])
        if entry.a[0]:
            coefs[self.fleet_row] = 1.0
        for (i, j) in entry.arcs():
            coefs[self.cap_row[i, j]] = self.inst.q[j] + self.inst.Q
            if self.tw:
                m_ij = self.inst.big_m(i, j)
                coefs[self.tw_row[i, j]] = self.inst.s[i] + self.inst.t[i, j] + m_ij
        return entry.cost, coefs

    def add_pool_columns(self, cols: Sequence[PoolEntry]) -> None:
        """Append columns (validated against this master's instance/p)."""
        cols = [_check_entry(self.inst, self.p, c) for c in cols]
        base = self.lp.ncols
        self.lp = lpmod.add_columns(self.lp, [self.column_entries(c) for c in cols])
        for t, c in enumerate(cols):
            self.pool.append(c)
            self.lam_cols.append(base + t)

    def lambda_values(self, sol: LpSolution) -> List[Tuple[PoolEntry, float]]:
        return [(c, float(sol.x[j])) for c, j in zip(self.pool, self.lam_cols)]

    def artificial_weight(self, sol: LpSolution) -> float:
        """Total lambda mass sitting on artificial feasibility columns."""
        return sum(
            float(sol.x[j])
            for c, j in zip(self.pool, self.lam_cols)
            if isinstance(c, ArtificialColumn)
        )


def _check_entry(inst: Instance, p: int, entry: PoolEntry) -> PoolEntry:
    if isinstance(entry, ArtificialColumn):
        if not 1 <= entry.customer <= inst.n:
            raise PoolError(f"artificial column for non-customer {entry.customer}")
        return entry
    try:
        rebuilt = column_from_path(inst, entry.path, p)
    except ColumnError as e:
        raise PoolError(f"column {entry} invalid for p={p}: {e}") from e
    if abs(rebuilt.cost - entry.cost) > 1e-9 + 1e-12 * abs(entry.cost):
        raise PoolError(f"column {entry} carries a stale cost")
    return rebuilt


def build_rmp(
    inst: Instance, p: int, pool: Sequence[PoolEntry], tw: bool = False
) -> MasterModel:
    """Assemble the restricted master over the given pool.

    Partition rows are equalities with rhs 1, flow rows equalities with
    rhs 0, the fleet row is <= K; lambdas are nonnegative and the phi
    (and omega) propagation variables carry their box bounds.
    """
    if tw and not inst.has_tw:
        raise ValueError("time-window mode requires an instance with windows")
    if not 1 <= p <= inst.n + 1:
        raise ValueError(f"p must lie in 1..{inst.n + 1}")
    n, nn = inst.n, inst.n + 2
    arcs = list(inst.legal_arcs())

    phi_col = {i: i for i in range(nn)}
    ncols = nn
    omega_col = {}
    if tw:
        omega_col = {i: ncols + i for i in range(nn)}
        ncols += nn

    part_row = {i: i - 1 for i in inst.customers()}
    flow_row = {i: n + i - 1 for i in inst.customers()}
    fleet_row = 2 * n
    cap_row = {arc: 2 * n + 1 + t for t, arc in enumerate(arcs)}
    tw_row = {}
    nrows = 2 * n + 1 + len(arcs)
    if tw:
        tw_row = {arc: nrows + t for t, arc in enumerate(arcs)}
        nrows += len(arcs)

    costs = np.zeros(ncols)
    lower = np.zeros(ncols)
    upper = np.zeros(ncols)
    for i in range(nn):
        lower[phi_col[i]] = inst.q[i]
        upper[phi_col[i]] = inst.Q
        if tw:
            lower[omega_col[i]] = inst.tw[i, 0]
            upper[omega_col[i]] = inst.tw[i, 1]

    rows: List[Tuple[str, float, dict]] = [None] * nrows
    for i in inst.customers():
        rows[part_row[i]] = (EQUAL, 1.0, {})
        rows[flow_row[i]] = (EQUAL, 0.0, {})
    rows[fleet_row] = (LESS, float(inst.K), {})
    for (i, j), r in cap_row.items():
        rows[r] = (LESS, inst.Q, {phi_col[i]: 1.0, phi_col[j]: -1.0})
    for (i, j), r in tw_row.items():
        rows[r] = (LESS, inst.big_m(i, j),
                   {omega_col[i]: 1.0, omega_col[j]: -1.0})

    program = lpmod.build_lp(costs, rows, bounds=list(zip(lower, upper)))
    model = MasterModel(
        inst=inst, p=p, tw=tw, lp=program,
        part_row=part_row, flow_row=flow_row, fleet_row=fleet_row,
        cap_row=cap_row, tw_row=tw_row, phi_col=phi_col, omega_col=omega_col,
    )
    model.add_pool_columns(list(pool))
    return model


# ---------------------------------------------------------------------------
# Duals and reduced costs


@dataclass(frozen=True)
class DualSolution:
    """Duals of the master rows; u1/u2 are zero at both depot copies,
    u3 <= 0, and the per-arc u4/u5 are <= 0 on legal arcs (zero
    elsewhere).  The classical route-formulation duals are (u1, u3) when
    no propagation rows exist.
    """

    u1: np.ndarray
    u2: np.ndarray
    u3: float
    u4: np.ndarray
    u5: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("u1", "u2", "u4", "u5"):
            a = getattr(self, name)
            if a is not None:
                a.setflags(write=False)


def _clamp_tiny(a: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    out = np.array(a, dtype=float)
    out[np.abs(out) < tol] = 0.0
    return out


def extract_duals(model: MasterModel, sol: LpSolution) -> DualSolution:
    """Read u1..u5 off the solved master; magnitudes below 1e-9 are
    clamped to zero so sign conventions hold exactly."""
    if sol.status != lpmod.OPTIMAL:
        raise ModelStateError(f"duals need an optimal solution, got {sol.status}")
    n, nn = model.inst.n, model.inst.n + 2
    u1 = np.zeros(nn)
    u2 = np.zeros(nn)
    for i in model.inst.customers():
        u1[i] = sol.duals[model.part_row[i]]
        u2[i] = sol.duals[model.flow_row[i]]
    u3 = float(sol.duals[model.fleet_row])
    u4 = np.zeros((nn, nn))
    for arc, r in model.cap_row.items():
        u4[arc] = sol.duals[r]
    u5 = None
    if model.tw:
        u5 = np.zeros((nn, nn))
        for arc, r in model.tw_row.items():
            u5[arc] = sol.duals[r]
    u1 = _clamp_tiny(u1)
    u2 = _clamp_tiny(u2)
    u3 = float(_clamp_tiny(np.array([u3]))[0])
    u4 = _clamp_tiny(u4)
    if u5 is not None:
        u5 = _clamp_tiny(u5)
    if u3 > 0 or (u4 > 0).any() or (u5 is not None and (u5 > 0).any()):
        raise ModelStateError("dual sign convention violated beyond tolerance")
    return DualSolution(u1=u1, u2=u2, u3=min(u3, 0.0), u4=u4, u5=u5)


def dump_pool(pool: Sequence[PoolEntry]) -> str:
    """Column pool as text, one path per line (whitespace-separated node
    indices); artificials are not part of the persisted pool."""
    lines = [
        " ".join(str(v) for v in c.path)
        for c in pool
        if isinstance(c, PStepColumn)
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def load_pool(inst: Instance, p: int, text: str) -> List[PStepColumn]:
    """Parse a path-per-line pool dump, validating each path for (inst, p)."""
    cols = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            path = tuple(int(v) for v in line.split())
        except ValueError as e:
            raise PoolError(f"pool line {lineno}: {e}") from e
        try:
            cols.append(column_from_path(inst, path, p))
        except ColumnError as e:
            raise PoolError(f"pool line {lineno}: {e}") from e
    return cols


def reduced_cost(
    inst: Instance, duals: DualSolution, col: PStepColumn, tw: bool = False
) -> float:
    """Reduced cost of a column: arc terms (cost minus visit and
    propagation duals) plus the endpoint flow/fleet adjustments."""
    rc = 0.0
    for i, j in col.arcs():
        rc += inst.c[i, j] - duals.u1[i] - (inst.q[j] + inst.Q) * duals.u4[i, j]
        if tw:
            rc -= (inst.s[i] + inst.t[i, j] + inst.big_m(i, j)) * duals.u5[i, j]
    if col.first != 0:
        rc -= duals.u2[col.first]
    else:
        rc -= duals.u3
    if col.last != inst.sink:
        rc += duals.u2[col.last]
    return float(rc)
