"""Column-generation driver for the step-budgeted masters.

Solves the LP relaxation at any step size p in 1..n+1: big-M artificial
columns keep the restricted master feasible, the label-setting pricer
supplies improving columns, and warm restarts carry the simplex basis
across iterations.  An optional turning-point schedule grows p mid-solve
by concatenating pooled columns.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from . import lp as lpmod
from .formulation import (
    ArtificialColumn,
    ColumnError,
    MasterModel,
    PoolEntry,
    PStepColumn,
    build_rmp,
    column_from_path,
    extract_duals,
)
from .instance import Instance
from .lp import solve_lp
from .pricing import PricingConfig, price_with_stats

log = logging.getLogger("pstep.colgen")

ARTIFICIAL_BASIS_TOL = 1e-7


@dataclass(frozen=True)
class ColGenConfig:
    """p is the step budget; artificial_cost defaults to
    (n+1) * max arc cost + 1, safely above any route cost."""

    p: int
    tol: float = 1e-6
    max_iters: int = 10000
    artificial_cost: Optional[float] = None
    pricing: PricingConfig = field(default_factory=PricingConfig)
    turning_points: Optional[Tuple[Tuple[int, int], ...]] = None

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class IterationRecord:
    objective: float
    min_rc: Optional[float]


@dataclass
class ColGenResult:
    bound: float
    iterations: int
    columns_generated: int
    status: str                      # "optimal" | "iteration_limit"
    feasible: bool                   # False when artificials stayed basic
    p: int
    lambdas: List[Tuple[Union[Tuple[int, ...], int], float]]
    phi: List[float]
    omega: Optional[List[float]]
    log: List[IterationRecord]
    wall_ms: float


def default_artificial_cost(inst: Instance) -> float:
    return (inst.n + 1) * float(inst.c.max()) + 1.0


def initial_columns(
    inst: Instance, p: int, artificial_cost: Optional[float] = None
) -> List[PoolEntry]:
    """One big-M artificial per partition row plus, when feasible, every
    depot round trip expressed as valid chains for the given p."""
    cost = default_artificial_cost(inst) if artificial_cost is None else artificial_cost
    if cost <= inst.n * float(inst.c.max()):
        raise ValueError("artificial cost must exceed n * max arc cost")
    pool: List[PoolEntry] = [ArtificialColumn(i, cost) for i in inst.customers()]
    for i in inst.customers():
        if p == 1:
            candidates = [(0, i), (i, inst.sink)]
        else:
            candidates = [(0, i, inst.sink)]
        for path in candidates:
            try:
                pool.append(column_from_path(inst, path, p))
            except ColumnError:
                pass
    return pool


def turning_point_merge(
    inst: Instance, pool: Sequence[PStepColumn], p: int, k: int
) -> List[PStepColumn]:
    """Pool for step size p+k: every feasible concatenation of pooled
    columns sharing an endpoint, plus the depot-start columns that stay
    valid; deduplicated and sorted for reproducible pools."""
    if k < 1:
        raise ValueError("increment must be >= 1")
    target = p + k
    if target > inst.n + 1:
        raise ValueError(f"p+k={target} exceeds n+1={inst.n + 1}")
    merged: Dict[Tuple[int, ...], PStepColumn] = {}

    def try_add(path: Tuple[int, ...]):
        if path in merged:
            return
        try:
            merged[path] = column_from_path(inst, path, target)
        except ColumnError:
            pass

    by_first: Dict[int, List[PStepColumn]] = {}
    for col in pool:
        by_first.setdefault(col.first, []).append(col)
        if col.first == 0:
            try_add(col.path)
    for a in pool:
        for b in by_first.get(a.last, ()):
            try_add(a.path + b.path[1:])
    return [merged[path] for path in sorted(merged)]


def solve_relaxation(
    inst: Instance,
    cfg: ColGenConfig,
    tw: bool = False,
    seed_pool: Optional[Sequence[PStepColumn]] = None,
) -> ColGenResult:
    """Iterate master solve / dual extraction / pricing until no column
    prices out below -tol.  At optimal status the bound equals the LP
    value of the full column set; an instance with no feasible cover is
    reported through artificials staying basic (feasible=False).

    seed_pool warm-starts the master with previously generated columns
    (see formulation.load_pool for the file format)."""
    t_start = time.perf_counter()
    p = cfg.p
    if not 1 <= p <= inst.n + 1:
        raise ValueError(f"p must lie in 1..{inst.n + 1}")
    schedule = dict(cfg.turning_points or ())
    art_cost = cfg.artificial_cost
    # the termination threshold and the pricing negativity threshold are
    # one and the same knob
    pricing_cfg = cfg.pricing
    if pricing_cfg.tol != cfg.tol:
        pricing_cfg = PricingConfig(
            tol=cfg.tol,
            max_columns_per_round=cfg.pricing.max_columns_per_round,
            per_start_best=cfg.pricing.per_start_best,
            workers=cfg.pricing.workers,
        )
    start_pool = initial_columns(inst, p, art_cost)
    have = {c.path for c in start_pool if isinstance(c, PStepColumn)}
    for col in seed_pool or ():
        if col.path not in have:
            start_pool.append(col)
            have.add(col.path)
    model = build_rmp(inst, p, start_pool, tw=tw)
    known = model.pool_paths()
    warm = None
    sol = None
    history: List[IterationRecord] = []
    generated = 0
    status = lpmod.ITERATION_LIMIT
    iterations = 0
    for it in range(1, cfg.max_iters + 1):
        iterations = it
        new_p = schedule.get(it)
        if new_p is not None and new_p > p:
            real = [c for c in model.pool if isinstance(c, PStepColumn)]
            merged = turning_point_merge(inst, real, p, new_p - p)
            p = new_p
            arts = [c for c in model.pool if isinstance(c, ArtificialColumn)]
            model = build_rmp(inst, p, arts + merged, tw=tw)
            known = model.pool_paths()
            warm = None
        sol = solve_lp(model.lp, warm)
        if sol.status != lpmod.OPTIMAL:
            raise RuntimeError(f"master LP returned {sol.status}")
        duals = extract_duals(model, sol)
        cols, stats = price_with_stats(inst, p, duals, pricing_cfg, tw)
        log.info(
            "iter %d: p=%d obj=%.9g min_rc=%s labels=%d dominated=%d emitted=%d",
            it, p, sol.objective,
            "n/a" if stats.min_rc is None else f"{stats.min_rc:.3e}",
            stats.labels, stats.dominated, stats.emitted,
        )
        history.append(IterationRecord(objective=sol.objective, min_rc=stats.min_rc))
        new_cols = [c for c in cols if c.path not in known]
        if not new_cols:
            if cols:
                raise RuntimeError("pricer re-emitted pooled columns at optimality")
            status = lpmod.OPTIMAL
            break
        model.add_pool_columns(new_cols)
        known.update(c.path for c in new_cols)
        generated += len(new_cols)
        warm = sol.basis

    if status != lpmod.OPTIMAL:
        # align the reported solution with the grown master
        sol = solve_lp(model.lp, warm)
        if sol.status != lpmod.OPTIMAL:
            raise RuntimeError(f"master LP returned {sol.status}")
    feasible = model.artificial_weight(sol) <= ARTIFICIAL_BASIS_TOL
    lambdas: List[Tuple[Union[Tuple[int, ...], int], float]] = []
    for entry, value in model.lambda_values(sol):
        if value > 1e-9:
            key = entry.path if isinstance(entry, PStepColumn) else entry.customer
            lambdas.append((key, value))
    phi = [float(sol.x[model.phi_col[i]]) for i in range(inst.n + 2)]
    omega = None
    if tw:
        omega = [float(sol.x[model.omega_col[i]]) for i in range(inst.n + 2)]
    return ColGenResult(
        bound=float(sol.objective),
        iterations=iterations,
        columns_generated=generated,
        status=status,
        feasible=feasible,
        p=p,
        lambdas=lambdas,
        phi=phi,
        omega=omega,
        log=history,
        wall_ms=(time.perf_counter() - t_start) * 1000.0,
    )


def result_to_dict(inst: Instance, result: ColGenResult) -> dict:
    """JSON-ready form of a solve: bound, iteration log, nonzero lambda
    paths (artificials keyed by covered customer) and timings."""
    lam = []
    for key, value in result.lambdas:
        if isinstance(key, tuple):
            lam.append({"path": list(key), "value": value})
        else:
            lam.append({"artificial": key, "value": value})
    return {
        "instance": inst.name,
        "p": result.p,
        "status": result.status,
        "feasible": result.feasible,
        "bound": result.bound,
        "iterations": result.iterations,
        "columns_generated": result.columns_generated,
        "log": [
            {"objective": rec.objective, "min_rc": rec.min_rc} for rec in result.log
        ],
        "lambdas": lam,
        "phi": result.phi,
        "omega": result.omega,
        "wall_ms": result.wall_ms,
    }
