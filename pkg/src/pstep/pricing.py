"""Label-setting pricer for the step-budgeted masters.

Generates negative-reduced-cost partial-path columns by dynamic
programming per start node: labels extend one arc at a time under the
step budget, capacity, elementarity (exact, via visited bit-sets) and
optional time windows.  Start nodes are independent, so pricing may run
them in parallel; the merged output is sorted by (reduced cost, path)
and is therefore identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .formulation import DualSolution, PStepColumn, column_from_path
from .instance import Instance


@dataclass(frozen=True)
class PricingConfig:
    """tol is the negativity threshold; the caps bound how many columns
    a round may emit (they never affect whether the round is empty)."""

    tol: float = 1e-6
    max_columns_per_round: int = 200
    per_start_best: int = 10
    workers: int = 1

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_columns_per_round < 1 or self.per_start_best < 1:
            raise ValueError("column caps must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class Label:
    """Pricing state at `node` after `steps` arcs from `start`.

    load excludes the start node's demand (it mirrors the column's q_s);
    rc accumulates modified arc costs only, endpoint dual terms are
    added at emission.
    """

    start: int
    node: int
    steps: int
    load: float
    time: float
    visited: int              # customer/depot bit-set
    rc: float
    parent: Optional["Label"] = None

    def path(self) -> Tuple[int, ...]:
        nodes = []
        lab = self
        while lab is not None:
            nodes.append(lab.node)
            lab = lab.parent
        return tuple(reversed(nodes))


@dataclass
class PricingStats:
    labels: int = 0
    dominated: int = 0
    emitted: int = 0
    min_rc: Optional[float] = None


def dominates(a: Label, b: Label) -> bool:
    """True iff a is at least as extendable as b and strictly better in
    some coordinate.  The visited-subset condition is not optional:
    modified arc costs may be negative, so a cheaper label visiting
    other customers can block extensions only a costlier label allows.
    """
    if a.start != b.start or a.node != b.node:
        raise ValueError("dominance compares labels at the same (start, node)")
    if a.steps > b.steps or a.load > b.load or a.rc > b.rc or a.time > b.time:
        return False
    if a.visited & ~b.visited:
        return False
    return (
        a.steps < b.steps
        or a.load < b.load
        or a.rc < b.rc
        or a.time < b.time
        or a.visited != b.visited
    )


def modified_arc_cost(
    inst: Instance, duals: DualSolution, i: int, j: int, tw: bool = False
) -> float:
    """Arc cost with the tail-node visit dual and the propagation-row
    duals folded in."""
    if not inst.is_legal_arc(i, j):
        raise ValueError(f"({i},{j}) is not a legal arc")
    v = inst.c[i, j] - duals.u1[i] - (inst.q[j] + inst.Q) * duals.u4[i, j]
    if tw:
        v -= (inst.s[i] + inst.t[i, j] + inst.big_m(i, j)) * duals.u5[i, j]
    return float(v)


def _finalize_rc(duals: DualSolution, start: int, last: int, sink: int, rc: float) -> float:
    if start != 0:
        rc -= duals.u2[start]
    else:
        rc -= duals.u3
    if last != sink:
        rc += duals.u2[last]
    return rc


def _price_start(
    inst: Instance,
    p: int,
    duals: DualSolution,
    tw: bool,
    start: int,
    tol: float,
    keep: int,
    stats: PricingStats,
) -> List[Tuple[float, Tuple[int, ...]]]:
    """All candidate columns from one start node: any label with exactly
    p arcs, plus every label when the start is the depot origin."""
    sink = inst.sink
    cap = inst.Q - inst.q[start]
    t0 = float(inst.tw[start, 0]) if tw else 0.0
    root = Label(start, start, 0, 0.0, t0, 1 << start, 0.0)
    buckets: Dict[int, List[Label]] = {start: [root]}
    found: List[Tuple[float, Tuple[int, ...]]] = []
    best_seen = None
    arc_cost = {}
    for step in range(1, p + 1):
        nxt: Dict[int, List[Label]] = {}
        for labs in buckets.values():
            for lab in labs:
                if lab.node == sink:
                    continue
                for j in range(1, sink + 1):
                    if lab.visited >> j & 1 or not inst.is_legal_arc(lab.node, j):
                        continue
                    if j == sink and start != 0 and step != p:
                        continue  # dead end: exact step counts only
                    load = lab.load + inst.q[j]
                    if load > cap + 1e-9:
                        continue
                    if tw:
                        t = max(
                            inst.tw[j, 0],
                            lab.time + inst.s[lab.node] + inst.t[lab.node, j],
                        )
                        if t > inst.tw[j, 1] + 1e-9:
                            continue
                    else:
                        t = 0.0
                    key = (lab.node, j)
                    cbar = arc_cost.get(key)
                    if cbar is None:
                        cbar = modified_arc_cost(inst, duals, lab.node, j, tw)
                        arc_cost[key] = cbar
                    new = Label(start, j, step, load, t,
                                lab.visited | (1 << j), lab.rc + cbar, lab)
                    stats.labels += 1
                    if step == p or start == 0:
                        rc = _finalize_rc(duals, start, j, sink, new.rc)
                        if best_seen is None or rc < best_seen:
                            best_seen = rc
                        if rc < -tol:
                            found.append((rc, new.path()))
                    if step == p or j == sink:
                        continue  # no further extension possible
                    bucket = nxt.setdefault(j, [])
                    if any(dominates(old, new) for old in bucket):
                        stats.dominated += 1
                        continue
                    survivors = [old for old in bucket if not dominates(new, old)]
                    stats.dominated += len(bucket) - len(survivors)
                    survivors.append(new)
                    nxt[j] = survivors
        buckets = nxt
        if not buckets:
            break
    found.sort()
    if best_seen is not None and (
        stats.min_rc is None or best_seen < stats.min_rc
    ):
        stats.min_rc = best_seen
    return found[:keep]


def price_with_stats(
    inst: Instance,
    p: int,
    duals: DualSolution,
    cfg: PricingConfig,
    tw: bool = False,
) -> Tuple[List[PStepColumn], PricingStats]:
    """Price all start nodes; returns columns sorted by (reduced cost,
    path) truncated to the round cap, plus counters including the exact
    minimum reduced cost over the whole column set."""
    stats = PricingStats()
    starts = [s for s in range(0, inst.n + 1) if s == 0 or p <= inst.n]
    if cfg.workers > 1 and len(starts) > 1:
        per_stats = [PricingStats() for _ in starts]
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(
                pool.map(
                    lambda pair: _price_start(
                        inst, p, duals, tw, pair[1], cfg.tol,
                        cfg.per_start_best, per_stats[pair[0]],
                    ),
                    enumerate(starts),
                )
            )
        merged = [item for part in results for item in part]
        for ps in per_stats:
            stats.labels += ps.labels
            stats.dominated += ps.dominated
            if ps.min_rc is not None and (
                stats.min_rc is None or ps.min_rc < stats.min_rc
            ):
                stats.min_rc = ps.min_rc
    else:
        merged = []
        for s in starts:
            merged.extend(
                _price_start(inst, p, duals, tw, s, cfg.tol,
                             cfg.per_start_best, stats)
            )
    merged.sort()
    merged = merged[: cfg.max_columns_per_round]
    cols = [column_from_path(inst, path, p) for _, path in merged]
    stats.emitted = len(cols)
    return cols, stats


def price(
    inst: Instance,
    p: int,
    duals: DualSolution,
    cfg: Optional[PricingConfig] = None,
    tw: bool = False,
) -> List[PStepColumn]:
    """Columns with reduced cost below -tol; an empty result proves no
    column in the full set prices out at that threshold."""
    cols, _ = price_with_stats(inst, p, duals, cfg or PricingConfig(), tw)
    return cols
