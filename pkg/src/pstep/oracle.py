"""Brute-force ground truth for desk-scale instances.

Everything here is deliberately exhaustive: full enumeration of the
partial-path column set, explicit LPs over that set, the pure
route-partition LP, tiny-instance integer optima, and the constructive
certificates (convex-combination load variables, column cutting) that
replay the bound-ordering arguments numerically.  Budget guards fail
loudly; a truncated oracle is worse than none.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import lp as lpmod
from .formulation import (
    ArtificialColumn,
    ColumnError,
    DualSolution,
    MasterModel,
    PStepColumn,
    build_rmp,
    column_from_path,
    reduced_cost,
)
from .instance import Instance
from .lp import EQUAL, LESS, LpSolution, build_lp, solve_lp


class BudgetError(RuntimeError):
    """Instance too large for exhaustive ground truth."""


class EnumerationOverflow(BudgetError):
    def __init__(self, count: int):
        self.count = count
        super().__init__(f"path budget exhausted after {count} paths")


class InfeasibleModelError(RuntimeError):
    """An oracle LP or search found no feasible solution."""


class CertificateError(AssertionError):
    """A constructive certificate failed; this falsifies the argument it
    replays and must never be seen on valid inputs."""


class CuttingError(AssertionError):
    """Column cutting produced an invalid or value-changing result."""


@dataclass(frozen=True)
class EnumerationBudget:
    max_paths: int = 10_000_000
    max_nodes: int = 12

    def __post_init__(self):
        if self.max_paths < 1 or self.max_nodes < 1:
            raise ValueError("budget caps must be positive")


DEFAULT_BUDGET = EnumerationBudget()


def enumerate_psteps(
    inst: Instance, p: int, budget: EnumerationBudget = DEFAULT_BUDGET
) -> List[PStepColumn]:
    """The full column set: every feasible path of exactly p arcs from
    any start node, plus every feasible 1..p-1-arc path starting at the
    depot origin.  Deterministic DFS order (ascending node indices)."""
    if inst.n > budget.max_nodes:
        raise BudgetError(f"n={inst.n} exceeds the enumeration guard "
                          f"({budget.max_nodes})")
    if not 1 <= p <= inst.n + 1:
        raise ValueError(f"p must lie in 1..{inst.n + 1}")
    sink = inst.sink
    out: List[PStepColumn] = []

    def emit(path: List[int]):
        out.append(column_from_path(inst, path, p))
        if len(out) > budget.max_paths:
            raise EnumerationOverflow(len(out))

    def extend(path: List[int], load: float, time: float, start: int):
        node = path[-1]
        steps = len(path) - 1
        if steps == p or node == sink:
            return
        for j in range(1, sink + 1):
            if j in path or not inst.is_legal_arc(node, j):
                continue
            if j == sink and start != 0 and steps + 1 != p:
                continue
            new_load = load + inst.q[j]
            if new_load > inst.Q + 1e-9:
                continue
            if inst.has_tw:
                t = max(inst.tw[j, 0], time + inst.s[node] + inst.t[node, j])
                if t > inst.tw[j, 1] + 1e-9:
                    continue
            else:
                t = 0.0
            path.append(j)
            if steps + 1 == p or start == 0:
                emit(path)
            extend(path, new_load, t, start)
            path.pop()

    for start in range(0, inst.n + 1):
        if start != 0 and p > inst.n:
            continue  # a non-depot start can traverse at most n arcs
        t0 = float(inst.tw[start, 0]) if inst.has_tw else 0.0
        extend([start], float(inst.q[start]), t0, start)
    return out


def enumerate_routes(
    inst: Instance, budget: EnumerationBudget = DEFAULT_BUDGET
) -> List[PStepColumn]:
    """All complete feasible routes origin -> customers -> sink."""
    full = enumerate_psteps(inst, inst.n + 1, budget)
    return [c for c in full if c.first == 0 and c.last == inst.sink]


# ---------------------------------------------------------------------------
# Explicit LPs


def explicit_master(
    inst: Instance, p: int, budget: EnumerationBudget = DEFAULT_BUDGET
) -> Tuple[MasterModel, LpSolution]:
    """Full master over the entire enumerated column set, solved."""
    pool = enumerate_psteps(inst, p, budget)
    model = build_rmp(inst, p, pool, tw=inst.has_tw)
    sol = solve_lp(model.lp)
    if sol.status != lpmod.OPTIMAL:
        raise InfeasibleModelError(f"explicit master at p={p}: {sol.status}")
    return model, sol


def explicit_bound(
    inst: Instance, p: int, budget: EnumerationBudget = DEFAULT_BUDGET
) -> float:
    """LP value of the full master at step size p."""
    return explicit_master(inst, p, budget)[1].objective


def sp_lp(
    inst: Instance, budget: EnumerationBudget = DEFAULT_BUDGET
) -> Tuple[List[PStepColumn], LpSolution]:
    """The pure route-partition LP: one equality row per customer plus
    the fleet row, over all complete routes."""
    routes = enumerate_routes(inst, budget)
    n = inst.n
    costs = [r.cost for r in routes]
    rows: List[Tuple[str, float, dict]] = []
    for i in inst.customers():
        rows.append((EQUAL, 1.0, {t: float(r.e[i]) for t, r in enumerate(routes)
                                  if r.e[i]}))
    rows.append((LESS, float(inst.K), {t: 1.0 for t in range(len(routes))}))
    program = build_lp(np.asarray(costs, dtype=float), rows)
    sol = solve_lp(program)
    return routes, sol


def sp_lp_bound(inst: Instance, budget: EnumerationBudget = DEFAULT_BUDGET) -> float:
    routes, sol = sp_lp(inst, budget)
    if sol.status != lpmod.OPTIMAL:
        raise InfeasibleModelError(f"route-partition LP: {sol.status}")
    return sol.objective


# ---------------------------------------------------------------------------
# Integer optimum by exhaustive partition search


def _best_route_for_subset(inst: Instance, subset: Tuple[int, ...]) -> Optional[Tuple[float, Tuple[int, ...]]]:
    """Cheapest feasible ordering of one customer subset, by exhaustive
    permutation with capacity and window checks."""
    if sum(inst.q[i] for i in subset) > inst.Q + 1e-9:
        return None
    best = None
    for perm in itertools.permutations(subset):
        path = (0,) + perm + (inst.sink,)
        try:
            col = column_from_path(inst, path, inst.n + 1)
        except ColumnError:
            continue
        if best is None or (col.cost, col.path) < best:
            best = (col.cost, col.path)
    return best


def integer_optimum(
    inst: Instance, budget: EnumerationBudget = DEFAULT_BUDGET
) -> Tuple[float, List[Tuple[int, ...]]]:
    """Exhaustive minimum over partitions of the customers into at most
    K feasible routes, each ordered optimally."""
    n = inst.n
    if n > 8:
        raise BudgetError("integer oracle supports n <= 8")
    full = (1 << n) - 1
    route_cost: Dict[int, Tuple[float, Tuple[int, ...]]] = {}
    for mask in range(1, full + 1):
        subset = tuple(i + 1 for i in range(n) if mask >> i & 1)
        best = _best_route_for_subset(inst, subset)
        if best is not None:
            route_cost[mask] = best

    INF = math.inf
    # value[mask][r] = min cost covering `mask` with exactly r routes
    value = [[INF] * (inst.K + 1) for _ in range(full + 1)]
    choice: Dict[Tuple[int, int], int] = {}
    value[0][0] = 0.0
    for mask in range(1, full + 1):
        low = mask & -mask
        sub = mask
        while sub:
            if sub & low and sub in route_cost:
                rest = mask ^ sub
                c = route_cost[sub][0]
                for r in range(1, inst.K + 1):
                    cand = value[rest][r - 1] + c
                    if cand < value[mask][r] - 1e-15:
                        value[mask][r] = cand
                        choice[mask, r] = sub
            sub = (sub - 1) & mask
    best_r = min(range(inst.K + 1), key=lambda r: value[full][r])
    if not math.isfinite(value[full][best_r]):
        raise InfeasibleModelError("no partition into <= K feasible routes")
    routes = []
    mask, r = full, best_r
    while mask:
        sub = choice[mask, r]
        routes.append(route_cost[sub][1])
        mask ^= sub
        r -= 1
    return value[full][best_r], routes


# ---------------------------------------------------------------------------
# Reduced-cost ground truth


def min_rc_bruteforce(
    inst: Instance,
    p: int,
    duals: DualSolution,
    tw: bool = False,
    budget: EnumerationBudget = DEFAULT_BUDGET,
    pool: Optional[Sequence[PStepColumn]] = None,
) -> float:
    """Minimum reduced cost over the full column set (enumerated here
    unless a pre-enumerated pool is supplied)."""
    cols = enumerate_psteps(inst, p, budget) if pool is None else pool
    return min(reduced_cost(inst, duals, c, tw) for c in cols)


def random_duals(
    inst: Instance, rng: np.random.Generator, tw: bool = False,
    scale: Optional[float] = None,
) -> DualSolution:
    """Sign-respecting random dual vectors for pricing exactness tests."""
    nn = inst.n + 2
    if scale is None:
        scale = max(inst.c.max(), 1.0)
    u1 = np.zeros(nn)
    u2 = np.zeros(nn)
    u1[1 : inst.n + 1] = rng.normal(0.0, scale, size=inst.n)
    u2[1 : inst.n + 1] = rng.normal(0.0, scale / 2.0, size=inst.n)
    u3 = -abs(rng.normal(0.0, scale / 2.0))
    u4 = np.zeros((nn, nn))
    u5 = np.zeros((nn, nn)) if tw else None
    for (i, j) in inst.legal_arcs():
        if rng.random() < 0.3:
            u4[i, j] = -abs(rng.normal(0.0, scale / (2.0 * (inst.Q + 1.0))))
        if tw and rng.random() < 0.3:
            m_ij = inst.big_m(i, j)
            u5[i, j] = -abs(rng.normal(0.0, scale / (2.0 * (m_ij + 1.0))))
    return DualSolution(u1=u1, u2=u2, u3=float(u3), u4=u4, u5=u5)


# ---------------------------------------------------------------------------
# Constructive certificates


def phi_from_combination(
    inst: Instance, pool: Sequence[PStepColumn], lambdas: Sequence[float]
) -> np.ndarray:
    """Convex-combination load variables: phi_i = sum_s lambda_s *
    (demand accumulated along s up to i), zero when i is not on s."""
    nn = inst.n + 2
    phi = np.zeros(nn)
    for col, lam in zip(pool, lambdas):
        if lam == 0.0:
            continue
        for pos, v in enumerate(col.path):
            phi[v] += lam * col.phi_cum[pos]
    return phi


def phi_certificate(
    inst: Instance, pool: Sequence[PStepColumn], lambdas: Sequence[float]
) -> np.ndarray:
    """Lift a route-partition LP solution into load variables and verify
    they satisfy every box bound and load-propagation row of the
    longest-step master.  A failure here would falsify the equivalence
    argument, so it raises instead of returning."""
    n, sink = inst.n, inst.sink
    cover = np.zeros(n + 2)
    flow: Dict[Tuple[int, int], float] = {}
    for col, lam in zip(pool, lambdas):
        if lam < -1e-9:
            raise CertificateError("negative lambda weight")
        for i in inst.customers():
            if col.e[i]:
                cover[i] += lam
        for arc in col.arcs():
            flow[arc] = flow.get(arc, 0.0) + lam
    for i in inst.customers():
        if abs(cover[i] - 1.0) > 1e-6:
            raise CertificateError(
                f"precondition: customer {i} covered {cover[i]:.6g}, not 1"
            )
    phi = phi_from_combination(inst, pool, lambdas)
    for i in range(0, n + 1):
        if not inst.q[i] - 1e-9 <= phi[i] <= inst.Q + 1e-9:
            raise CertificateError(
                f"phi[{i}]={phi[i]:.6g} outside [{inst.q[i]}, {inst.Q}]"
            )
    for (i, j) in inst.legal_arcs():
        lhs = phi[i] - phi[j] + (inst.q[j] + inst.Q) * flow.get((i, j), 0.0)
        if lhs > inst.Q + 1e-7:
            raise CertificateError(
                f"load row ({i},{j}) violated: {lhs:.6g} > {inst.Q}"
            )
    return phi


def cut_solution(
    inst: Instance,
    pool: Sequence[PStepColumn],
    lambdas: Sequence[float],
    p: int,
) -> Tuple[List[PStepColumn], List[float]]:
    """Cut a feasible solution of a longer-step master into pieces of at
    most p arcs, cutting from the path's end so any short remainder
    starts at the depot origin.  Piece weights inherit the parent
    lambda; the result is verified feasible for the p master with the
    identical objective value.
    """
    pieces: Dict[Tuple[int, ...], float] = {}
    parent_obj = 0.0
    for col, lam in zip(pool, lambdas):
        if lam <= 1e-12:
            continue
        parent_obj += lam * col.cost
        k = col.k
        rem = k % p
        if col.first != 0 and rem != 0:
            raise CuttingError(
                f"{col} has {k} arcs, not a multiple of {p}, and does not "
                "start at the depot origin"
            )
        breakpoints = list(range(rem, k + 1, p))
        if rem:
            breakpoints = [0] + breakpoints
        for a, b in zip(breakpoints[:-1], breakpoints[1:]):
            piece = col.path[a : b + 1]
            pieces[piece] = pieces.get(piece, 0.0) + lam
    try:
        cut_cols = [column_from_path(inst, path, p) for path in sorted(pieces)]
    except ColumnError as e:
        raise CuttingError(f"cut produced an invalid piece: {e}") from e
    weights = [pieces[c.path] for c in cut_cols]
    piece_obj = sum(w * c.cost for c, w in zip(cut_cols, weights))
    if abs(piece_obj - parent_obj) > 1e-12 * max(1.0, abs(parent_obj)):
        raise CuttingError(
            f"objective drifted: parents {parent_obj!r}, pieces {piece_obj!r}"
        )
    _assert_activities_preserved(inst, pool, lambdas, cut_cols, weights)
    cover = _partition_activity(inst, pool, lambdas)
    if all(abs(v - 1.0) <= 1e-6 for v in cover):
        # the input was a genuine master solution, so the pieces must
        # assemble into one as well
        _assert_master_feasible(inst, cut_cols, weights, p, parent_obj)
    return cut_cols, weights


def _partition_activity(
    inst: Instance, pool: Sequence[PStepColumn], lambdas: Sequence[float]
) -> List[float]:
    cover = [0.0] * inst.n
    for col, lam in zip(pool, lambdas):
        if lam <= 1e-12:
            continue
        for i in inst.customers():
            if col.e[i]:
                cover[i - 1] += lam
    return cover


def _assert_activities_preserved(
    inst: Instance,
    pool: Sequence[PStepColumn],
    lambdas: Sequence[float],
    cols: Sequence[PStepColumn],
    weights: Sequence[float],
):
    """Cutting must leave every master-row activity untouched: visit
    coverage, endpoint flow, fleet usage and per-arc flow."""

    def activities(cs, ws):
        cover = np.zeros(inst.n + 1)
        flow = np.zeros(inst.n + 1)
        fleet = 0.0
        arcs: Dict[Tuple[int, int], float] = {}
        for col, w in zip(cs, ws):
            if w <= 1e-12:
                continue
            for i in range(inst.n + 1):
                cover[i] += w * col.e[i]
                flow[i] += w * col.a[i]
            if col.first == 0:
                fleet += w
            for arc in col.arcs():
                arcs[arc] = arcs.get(arc, 0.0) + w
        return cover, flow, fleet, arcs

    c0, f0, k0, a0 = activities(pool, lambdas)
    c1, f1, k1, a1 = activities(cols, weights)
    if not (np.allclose(c0, c1, atol=1e-9) and np.allclose(f0, f1, atol=1e-9)):
        raise CuttingError("cutting changed visit or flow row activity")
    if abs(k0 - k1) > 1e-9:
        raise CuttingError("cutting changed fleet row activity")
    keys = set(a0) | set(a1)
    if any(abs(a0.get(k, 0.0) - a1.get(k, 0.0)) > 1e-9 for k in keys):
        raise CuttingError("cutting changed an arc flow")


def _assert_master_feasible(
    inst: Instance,
    cols: Sequence[PStepColumn],
    weights: Sequence[float],
    p: int,
    expected_obj: float,
):
    """Solve the p master with the lambdas pinned; only the propagation
    variables remain free, so optimality certifies feasibility."""
    model = build_rmp(inst, p, cols, tw=inst.has_tw)
    prog = model.lp
    lower = prog.lower.copy()
    upper = prog.upper.copy()
    for w, j in zip(weights, model.lam_cols):
        lower[j] = upper[j] = w
    pinned = lpmod.LinearProgram(
        prog.costs.copy(), lower, upper, prog.senses, prog.rhs.copy(),
        prog.matrix.copy(),
    )
    sol = solve_lp(pinned)
    if sol.status != lpmod.OPTIMAL:
        raise CuttingError(f"cut solution infeasible for p={p}: {sol.status}")
    if abs(sol.objective - expected_obj) > 1e-7 * max(1.0, abs(expected_obj)):
        raise CuttingError(
            f"pinned master objective {sol.objective} != expected {expected_obj}"
        )
