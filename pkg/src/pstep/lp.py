"""Dense linear-programming kernel.

Bounded-variable primal simplex, two phases, with native equality rows,
per-row duals, warm restart from a basis descriptor, and incremental
column addition.  Minimization only.  Dual sign convention at an optimum
of a minimization problem: duals of <= rows are <= 0, duals of >= rows
are >= 0, duals of = rows are free.

The implementation is deliberately dense: every model in this package is
desk-scale (hundreds of rows, at most tens of thousands of columns), so
a numpy matrix and a fresh LU factor per pivot beat sparse bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

LESS, EQUAL, GREATER = "L", "E", "G"

FEAS_TOL = 1e-9       # primal feasibility, absolute
DUAL_TOL = 1e-9       # reduced-cost threshold for entering candidates
PIVOT_TOL = 1e-10     # smallest usable ratio-test denominator
STALL_LIMIT = 400     # non-improving pivots before Bland's rule engages

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


class LpError(ValueError):
    """Structural problem with an LP (bad shapes, bad indices)."""


@dataclass(frozen=True)
class LinearProgram:
    """min c'x  s.t.  rows (sense, rhs), bounds l <= x <= u.

    Immutable once built; `add_columns` returns an extended copy.
    """

    costs: np.ndarray          # (ncols,)
    lower: np.ndarray          # (ncols,)
    upper: np.ndarray          # (ncols,)
    senses: Tuple[str, ...]    # length m, entries in {L, E, G}
    rhs: np.ndarray            # (m,)
    matrix: np.ndarray         # (m, ncols) dense

    def __post_init__(self):
        m, ncols = self.matrix.shape
        if self.costs.shape != (ncols,) or self.lower.shape != (ncols,):
            raise LpError("cost/bound dimensions do not match the matrix")
        if self.upper.shape != (ncols,) or self.rhs.shape != (m,):
            raise LpError("bound/rhs dimensions do not match the matrix")
        if len(self.senses) != m:
            raise LpError("one sense per row required")
        if any(s not in (LESS, EQUAL, GREATER) for s in self.senses):
            raise LpError("row sense must be one of L, E, G")
        if not np.isfinite(self.costs).all():
            raise LpError("costs must be finite")
        if not np.isfinite(self.rhs).all():
            raise LpError("right-hand sides must be finite")
        if (self.lower > self.upper).any():
            raise LpError("lower bound above upper bound")
        for a in (self.costs, self.lower, self.upper, self.rhs, self.matrix):
            a.setflags(write=False)

    @property
    def nrows(self) -> int:
        return self.matrix.shape[0]

    @property
    def ncols(self) -> int:
        return self.matrix.shape[1]


def build_lp(
    costs: Sequence[float],
    rows: Iterable[Tuple[str, float, dict]],
    bounds: Optional[Sequence[Tuple[float, float]]] = None,
) -> LinearProgram:
    """Assemble a LinearProgram from sparse rows {col: coef}.

    Default column bounds are [0, +inf).
    """
    costs = np.asarray(costs, dtype=float)
    ncols = costs.shape[0]
    rows = list(rows)
    m = len(rows)
    mat = np.zeros((m, ncols))
    senses = []
    rhs = np.zeros(m)
    for r, (sense, b, coefs) in enumerate(rows):
        senses.append(sense)
        rhs[r] = b
        for j, v in coefs.items():
            if not 0 <= j < ncols:
                raise LpError(f"row {r} references column {j} out of range")
            mat[r, j] = v
    if bounds is None:
        lower = np.zeros(ncols)
        upper = np.full(ncols, np.inf)
    else:
        lower = np.array([b[0] for b in bounds], dtype=float)
        upper = np.array([b[1] for b in bounds], dtype=float)
    return LinearProgram(costs, lower, upper, tuple(senses), rhs, mat)


def add_columns(
    lp: LinearProgram,
    cols: Sequence[Tuple[float, dict]],
    bounds: Optional[Sequence[Tuple[float, float]]] = None,
) -> LinearProgram:
    """Extend an LP with new columns (cost, {row: coef}).

    A basis descriptor obtained from the original program stays valid:
    new columns start nonbasic at their lower bound.
    """
    k = len(cols)
    if k == 0:
        return lp
    m = lp.nrows
    block = np.zeros((m, k))
    newcost = np.zeros(k)
    for t, (cost, coefs) in enumerate(cols):
        newcost[t] = cost
        for r, v in coefs.items():
            if not 0 <= r < m:
                raise LpError(f"new column {t} references row {r} out of range")
            block[r, t] = v
    if bounds is None:
        lo = np.zeros(k)
        hi = np.full(k, np.inf)
    else:
        lo = np.array([b[0] for b in bounds], dtype=float)
        hi = np.array([b[1] for b in bounds], dtype=float)
    return LinearProgram(
        np.concatenate([lp.costs, newcost]),
        np.concatenate([lp.lower, lo]),
        np.concatenate([lp.upper, hi]),
        lp.senses,
        lp.rhs.copy(),
        np.hstack([lp.matrix, block]),
    )


@dataclass(frozen=True)
class BasisDescriptor:
    """Opaque warm-restart token.

    Keys are ("x", j) for structural columns, ("s", i) for row slacks and
    ("a", i) for phase-one artificials; art_signs records the +-1 column
    orientation the artificials were created with.
    """

    basic: Tuple[Tuple[str, int], ...]
    at_upper: frozenset
    art_signs: Tuple[int, ...]


@dataclass
class LpSolution:
    status: str
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    duals: Optional[np.ndarray] = None
    reduced_costs: Optional[np.ndarray] = None
    basis: Optional[BasisDescriptor] = None
    iterations: int = 0


class _Simplex:
    """One solve: extended column universe = structural | slack | artificial."""

    def __init__(self, lp: LinearProgram, art_signs: Optional[np.ndarray] = None):
        self.lp = lp
        m, nx = lp.nrows, lp.ncols
        self.m, self.nx = m, nx
        self.ns = nx + m          # first artificial index
        self.nt = nx + 2 * m
        slack_lo = np.zeros(m)
        slack_hi = np.zeros(m)
        for i, sense in enumerate(lp.senses):
            if sense == LESS:
                slack_lo[i], slack_hi[i] = 0.0, np.inf
            elif sense == GREATER:
                slack_lo[i], slack_hi[i] = -np.inf, 0.0
            else:
                slack_lo[i] = slack_hi[i] = 0.0
        self.lower = np.concatenate([lp.lower, slack_lo, np.zeros(m)])
        self.upper = np.concatenate([lp.upper, slack_hi, np.full(m, np.inf)])
        self.art_signs = (
            np.ones(m) if art_signs is None else np.asarray(art_signs, dtype=float)
        )
        self.A = np.hstack([lp.matrix, np.eye(m), np.diag(self.art_signs)])
        self.b = lp.rhs.astype(float)
        self.basis = None          # np.ndarray of m extended indices
        self.at_upper = np.zeros(self.nt, dtype=bool)
        self.iterations = 0

    # -- variable bookkeeping ------------------------------------------------

    def _default_at_upper(self) -> np.ndarray:
        """A nonbasic column with no finite lower bound rests at its upper
        bound; everything else rests at its lower bound (free columns at 0)."""
        return ~np.isfinite(self.lower) & np.isfinite(self.upper)

    def _nonbasic_values(self) -> np.ndarray:
        """Values of all columns assuming nonbasic status (basic entries
        are overwritten by the caller)."""
        v = np.where(self.at_upper, self.upper, self.lower)
        v[~np.isfinite(v)] = 0.0   # free variables rest at zero
        return v

    def _full_x(self) -> np.ndarray:
        x = self._nonbasic_values()
        x[self.basis] = 0.0
        xb = np.linalg.solve(self.A[:, self.basis], self.b - self.A @ x)
        x[self.basis] = xb
        return x

    # -- starting points -------------------------------------------------------

    def cold_start(self):
        self.at_upper = self._default_at_upper()
        x = self._nonbasic_values()
        r = self.b - self.A[:, : self.ns] @ x[: self.ns]
        signs = np.where(r >= 0, 1.0, -1.0)
        self.art_signs = signs
        self.A[:, self.ns :] = np.diag(signs)
        self.basis = np.arange(self.ns, self.nt)

    def try_warm_start(self, warm: BasisDescriptor) -> bool:
        idx = []
        for kind, i in warm.basic:
            if kind == "x":
                if not 0 <= i < self.nx:
                    return False
                idx.append(i)
            elif kind == "s":
                idx.append(self.nx + i)
            elif kind == "a":
                idx.append(self.ns + i)
            else:
                return False
        if len(idx) != self.m:
            return False
        if len(warm.art_signs) == self.m:
            self.art_signs = np.asarray(warm.art_signs, dtype=float)
            self.A[:, self.ns :] = np.diag(self.art_signs)
        self.basis = np.array(idx, dtype=int)
        self.at_upper = self._default_at_upper()
        self.at_upper[self.basis] = False
        for kind, i in warm.at_upper:
            j = {"x": 0, "s": self.nx, "a": self.ns}[kind] + i
            if j < self.nt:
                self.at_upper[j] = True
        # artificials are locked in a warm start; basis must be primal feasible
        self.upper[self.ns :] = 0.0
        try:
            x = self._full_x()
        except np.linalg.LinAlgError:
            return False
        xb = x[self.basis]
        lo, hi = self.lower[self.basis], self.upper[self.basis]
        if (xb < lo - 1e-7).any() or (xb > hi + 1e-7).any():
            return False
        return True

    # -- simplex core ----------------------------------------------------------

    def _iterate(self, costs: np.ndarray, maxiter: int) -> str:
        """Primal simplex under `costs`; returns a status string."""
        stall = 0
        bland = False
        last_obj = np.inf
        nonbasic = np.ones(self.nt, dtype=bool)
        nonbasic[self.basis] = False
        while True:
            if self.iterations >= maxiter:
                return ITERATION_LIMIT
            self.iterations += 1
            B = self.A[:, self.basis]
            x = self._nonbasic_values()
            x[self.basis] = 0.0
            try:
                xb = np.linalg.solve(B, self.b - self.A @ x)
                y = np.linalg.solve(B.T, costs[self.basis])
            except np.linalg.LinAlgError:
                return INFEASIBLE  # defensive; bases stay invertible by construction
            x[self.basis] = xb
            obj = costs @ x
            if obj < last_obj - 1e-12 * (1.0 + abs(last_obj)):
                stall = 0
            else:
                stall += 1
                if stall > STALL_LIMIT:
                    bland = True
            last_obj = obj

            d = costs - self.A.T @ y
            fixed = self.lower == self.upper
            # invariant: nonbasic columns sit at_upper when only the upper
            # bound is finite, at their lower bound otherwise, free ones at 0
            free = ~np.isfinite(self.lower) & ~np.isfinite(self.upper)
            can_up = nonbasic & ~fixed & ~self.at_upper & (d < -DUAL_TOL)
            can_dn = nonbasic & ~fixed & (self.at_upper | free) & (d > DUAL_TOL)
            eligible = can_up | can_dn
            if not eligible.any():
                return OPTIMAL
            if bland:
                e = int(np.flatnonzero(eligible)[0])
            else:
                score = np.where(eligible, np.abs(d), -1.0)
                e = int(np.argmax(score))
            sigma = 1.0 if can_up[e] else -1.0

            w = np.linalg.solve(B, self.A[:, e])
            delta = sigma * w
            lo_b = self.lower[self.basis]
            hi_b = self.upper[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_lo = np.where(delta > PIVOT_TOL, (xb - lo_b) / delta, np.inf)
                t_hi = np.where(delta < -PIVOT_TOL, (xb - hi_b) / delta, np.inf)
            ratios = np.minimum(t_lo, t_hi)
            ratios[~np.isfinite(ratios)] = np.inf
            ratios = np.maximum(ratios, 0.0)   # clip tiny negative drift
            min_ratio = ratios.min() if ratios.size else np.inf
            span = self.upper[e] - self.lower[e]
            t_bound = span if np.isfinite(span) else np.inf
            t_star = min(min_ratio, t_bound)
            if not np.isfinite(t_star):
                return UNBOUNDED
            if t_bound <= min_ratio:
                self.at_upper[e] = not self.at_upper[e]   # bound flip, no pivot
                continue
            hits = np.flatnonzero(np.abs(ratios - ratios.min()) <= 1e-12)
            leave_pos = int(hits[np.argmin(self.basis[hits])])
            leaving = self.basis[leave_pos]
            goes_upper = t_hi[leave_pos] <= t_lo[leave_pos]
            self.at_upper[leaving] = bool(
                goes_upper and np.isfinite(self.upper[leaving])
            )
            self.basis[leave_pos] = e
            self.at_upper[e] = False
            nonbasic[e] = False
            nonbasic[leaving] = True
            if leaving >= self.ns:
                # an artificial never returns once it leaves the basis
                self.upper[leaving] = 0.0

    def solve(self, warm: Optional[BasisDescriptor], maxiter: int) -> LpSolution:
        warm_ok = warm is not None and self.try_warm_start(warm)
        if not warm_ok:
            self.cold_start()
            phase1 = np.zeros(self.nt)
            phase1[self.ns :] = 1.0
            status = self._iterate(phase1, maxiter)
            if status == ITERATION_LIMIT:
                return self._finish(ITERATION_LIMIT)
            x = self._full_x()
            if x[self.ns :].sum() > 1e-7:
                return self._finish(INFEASIBLE)
            self.upper[self.ns :] = 0.0
        costs = np.zeros(self.nt)
        costs[: self.nx] = self.lp.costs
        status = self._iterate(costs, maxiter)
        return self._finish(status)

    def _finish(self, status: str) -> LpSolution:
        if status in (INFEASIBLE, UNBOUNDED):
            return LpSolution(status=status, iterations=self.iterations,
                              basis=self._descriptor())
        x = self._full_x()
        costs = np.zeros(self.nt)
        costs[: self.nx] = self.lp.costs
        y = np.linalg.solve(self.A[:, self.basis].T, costs[self.basis])
        d = self.lp.costs - self.lp.matrix.T @ y
        sol = LpSolution(
            status=status,
            x=x[: self.nx].copy(),
            objective=float(self.lp.costs @ x[: self.nx]),
            duals=y.copy(),
            reduced_costs=d,
            basis=self._descriptor(),
            iterations=self.iterations,
        )
        if status == OPTIMAL:
            self._check_residuals(x)
        return sol

    def _descriptor(self) -> BasisDescriptor:
        def key(j: int):
            if j < self.nx:
                return ("x", int(j))
            if j < self.ns:
                return ("s", int(j - self.nx))
            return ("a", int(j - self.ns))

        ups = frozenset(
            key(j) for j in np.flatnonzero(self.at_upper) if j not in set(self.basis)
        )
        return BasisDescriptor(
            basic=tuple(key(j) for j in self.basis),
            at_upper=ups,
            art_signs=tuple(int(v) for v in self.art_signs),
        )

    def _check_residuals(self, x: np.ndarray):
        act = self.A[:, : self.nx] @ x[: self.nx]
        scale = 1.0 + np.abs(self.b)
        for i, sense in enumerate(self.lp.senses):
            r = act[i] - self.b[i]
            bad = (
                r > FEAS_TOL * scale[i]
                if sense == LESS
                else (r < -FEAS_TOL * scale[i] if sense == GREATER
                      else abs(r) > FEAS_TOL * scale[i])
            )
            if bad:
                raise LpError(f"row {i} residual {r:.3e} beyond tolerance")


def solve_lp(
    lp: LinearProgram,
    warm: Optional[BasisDescriptor] = None,
    maxiter: int = 50000,
) -> LpSolution:
    """Solve to proven optimality (statuses: optimal / infeasible /
    unbounded / iteration_limit).  Deterministic: ties break on the
    lowest column index, with Bland's rule engaging after a stall.
    """
    sol = _Simplex(lp).solve(warm, maxiter)
    if warm is not None and sol.status == INFEASIBLE:
        # a stale warm basis must not masquerade as infeasibility
        sol = _Simplex(lp).solve(None, maxiter)
    return sol


def to_lp_text(lp: LinearProgram, name: str = "model") -> str:
    """Render in CPLEX-LP text syntax for cross-validation with external
    solvers."""
    out = [f"\\ {name}", "Minimize", " obj:"]
    terms = [
        f" {'+' if c >= 0 else '-'} {abs(c):.12g} x{j}"
        for j, c in enumerate(lp.costs)
        if c != 0.0
    ]
    out.append("  " + ("".join(terms) if terms else " 0 x0"))
    out.append("Subject To")
    rel = {LESS: "<=", EQUAL: "=", GREATER: ">="}
    for i in range(lp.nrows):
        row = lp.matrix[i]
        terms = [
            f" {'+' if v >= 0 else '-'} {abs(v):.12g} x{j}"
            for j, v in enumerate(row)
            if v != 0.0
        ]
        body = "".join(terms) if terms else " 0 x0"
        out.append(f" r{i}: {body} {rel[lp.senses[i]]} {lp.rhs[i]:.12g}")
    out.append("Bounds")
    for j in range(lp.ncols):
        lo, hi = lp.lower[j], lp.upper[j]
        lo_s = "-inf" if not np.isfinite(lo) else f"{lo:.12g}"
        hi_s = "+inf" if not np.isfinite(hi) else f"{hi:.12g}"
        out.append(f" {lo_s} <= x{j} <= {hi_s}")
    out.append("End")
    return "\n".join(out) + "\n"
