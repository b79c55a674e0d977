"""Command-line interface: solve one relaxation, sweep bounds across
step sizes, generate instances, and run the validation suites.

Every command prints a human-readable table and writes a machine-
readable JSON file; experiments never need to parse stdout.  Exit codes:
0 success, 1 error, 2 infeasible instance, 3 validation/tolerance
failure, 64 usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from typing import List, Optional, Sequence

import numpy as np

from . import colgen as cg
from . import lp as lpmod
from . import oracle
from .formulation import (
    PoolError,
    PStepColumn,
    build_vf_model,
    dump_pool,
    extract_duals,
    load_pool,
)
from .instance import (
    Instance,
    InstanceError,
    SyntheticSpec,
    generate_prop4,
    generate_prop5,
    generate_random,
    load_instance,
)
from .pricing import PricingConfig, price_with_stats

log = logging.getLogger("pstep")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_VALIDATION = 3
EXIT_USAGE = 64

ORDER_RTOL = 1e-6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _setup_logging():
    level = {"quiet": logging.WARNING, "info": logging.INFO,
             "debug": logging.DEBUG}.get(os.environ.get("PSTEP_LOG", "quiet"))
    logging.basicConfig(level=level or logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


def _default_workers() -> int:
    return os.cpu_count() or 1


def _load(path: str) -> Instance:
    try:
        return load_instance(path)
    except OSError as e:
        raise UsageError(f"cannot read instance file: {e}") from e
    except InstanceError as e:
        raise UsageError(f"bad instance file: {e}") from e


def _write_json(path: str, payload: dict):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# solve


def _solve_one(
    inst: Instance, p: int, mode: str, tw: bool, workers: int,
    pool_in: Optional[str] = None, pool_out: Optional[str] = None,
) -> dict:
    """One bound computation; returns the result payload."""
    t0 = time.perf_counter()
    if mode == "colgen":
        seed = None
        if pool_in:
            with open(pool_in, "r", encoding="utf-8") as f:
                seed = load_pool(inst, p, f.read())
        cfg = cg.ColGenConfig(p=p, pricing=PricingConfig(workers=workers))
        res = cg.solve_relaxation(inst, cfg, tw=tw, seed_pool=seed)
        if pool_out:
            # the support columns suffice to reproduce the bound on restart
            paths = [key for key, _ in res.lambdas if isinstance(key, tuple)]
            with open(pool_out, "w", encoding="utf-8") as f:
                for path in paths:
                    f.write(" ".join(str(v) for v in path) + "\n")
        payload = cg.result_to_dict(inst, res)
        payload["mode"] = "colgen"
        return payload
    if mode == "explicit":
        model, sol = oracle.explicit_master(inst, p)
        return {
            "instance": inst.name, "mode": "explicit", "p": p,
            "status": sol.status, "feasible": True, "bound": sol.objective,
            "iterations": sol.iterations, "columns_generated": len(model.pool),
            "wall_ms": (time.perf_counter() - t0) * 1000.0,
        }
    if mode == "vf":
        model = build_vf_model(inst, tw=tw)
        sol = lpmod.solve_lp(model.lp)
        feasible = sol.status == lpmod.OPTIMAL
        return {
            "instance": inst.name, "mode": "vf", "p": p,
            "status": sol.status, "feasible": feasible,
            "bound": sol.objective if feasible else None,
            "iterations": sol.iterations, "columns_generated": 0,
            "wall_ms": (time.perf_counter() - t0) * 1000.0,
        }
    raise UsageError(f"unknown mode {mode!r}")


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    if not 1 <= args.p <= inst.n + 1:
        raise UsageError(f"--p must lie in 1..{inst.n + 1} for this instance")
    tw = args.tw
    if tw and not inst.has_tw:
        raise UsageError("--tw given but the instance has no windows")
    if args.dump_lp:
        if args.mode == "vf":
            model = build_vf_model(inst, tw=tw)
            text = lpmod.to_lp_text(model.lp, name=f"{inst.name}-vf")
        else:
            emodel, _ = oracle.explicit_master(inst, args.p)
            text = lpmod.to_lp_text(emodel.lp, name=f"{inst.name}-p{args.p}")
        with open(args.dump_lp, "w", encoding="utf-8") as f:
            f.write(text)
    try:
        payload = _solve_one(inst, args.p, args.mode, tw, args.workers)
    except oracle.InfeasibleModelError:
        payload = {"instance": inst.name, "mode": args.mode, "p": args.p,
                   "status": "infeasible", "feasible": False, "bound": None}
    out = args.out or f"{inst.name}_p{args.p}_{args.mode}.result.json"
    _write_json(out, payload)
    print(format_solve_table(payload))
    print(f"result file: {out}")
    if payload["status"] == "infeasible" or not payload.get("feasible", True):
        return EXIT_INFEASIBLE
    if payload["status"] != "optimal":
        return EXIT_ERROR
    return EXIT_OK


def format_solve_table(payload: dict) -> str:
    lines = [
        f"instance : {payload['instance']}",
        f"mode     : {payload['mode']}  (p = {payload['p']})",
        f"status   : {payload['status']}"
        + ("" if payload.get("feasible", True) else "  [no feasible cover]"),
    ]
    if payload.get("bound") is not None:
        lines.append(f"bound    : {payload['bound']:.9g}")
    if "iterations" in payload:
        lines.append(f"iters    : {payload['iterations']}")
    if "wall_ms" in payload and payload["wall_ms"] is not None:
        lines.append(f"wall     : {payload['wall_ms']:.1f} ms")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# sweep


def _ordering_checks(rows: List[dict]) -> (List[dict], List[dict]):
    """Violations break the multiple/floor/ceiling orderings; notes mark
    legitimate reversals between non-multiple step sizes."""
    bound = {r["p"]: r["bound"] for r in rows if r["bound"] is not None}
    ps = sorted(bound)
    violations, notes = [], []
    for p in ps:
        for q in range(2, max(ps) + 1):
            pq = p * q
            if pq in bound and bound[pq] < bound[p] - ORDER_RTOL * abs(bound[p]):
                violations.append({
                    "kind": "multiple", "p": p, "q": q,
                    "z_p": bound[p], "z_pq": bound[pq],
                })
    if 1 in bound:
        for p in ps:
            if bound[p] < bound[1] - ORDER_RTOL * abs(bound[1]):
                violations.append({"kind": "floor", "p": p,
                                   "z_1": bound[1], "z_p": bound[p]})
    top = max(ps)
    for p in ps:
        if p != top and bound[top] < bound[p] - ORDER_RTOL * abs(bound[p]):
            # only a true ceiling when the sweep includes p = n+1; callers
            # pass complete sweeps, partial sweeps get a note instead
            notes.append({"kind": "top-reversal", "p": p, "top": top,
                          "z_p": bound[p], "z_top": bound[top]})
    for i, p in enumerate(ps):
        for pp in ps[i + 1:]:
            if pp % p != 0 and bound[pp] < bound[p] - ORDER_RTOL * abs(bound[p]):
                notes.append({"kind": "non-multiple-reversal", "p": p, "p2": pp,
                              "z_p": bound[p], "z_p2": bound[pp]})
    return violations, notes


def cmd_sweep(args) -> int:
    inst = _load(args.instance)
    if args.p_list:
        try:
            ps = sorted({int(v) for v in args.p_list.split(",")})
        except ValueError as e:
            raise UsageError(f"bad --p-list: {e}") from e
        if any(not 1 <= p <= inst.n + 1 for p in ps):
            raise UsageError(f"--p-list entries must lie in 1..{inst.n + 1}")
    else:
        ps = list(range(1, inst.n + 2))
    tw = inst.has_tw
    rows = []
    infeasible = False
    for p in ps:
        try:
            payload = _solve_one(inst, p, args.mode, tw, args.workers)
        except oracle.InfeasibleModelError:
            payload = {"status": "infeasible", "feasible": False, "bound": None,
                       "iterations": 0, "columns_generated": 0, "wall_ms": 0.0}
        infeasible |= not payload.get("feasible", True)
        rows.append({
            "p": p,
            "bound": payload["bound"],
            "iterations": payload.get("iterations", 0),
            "columns": payload.get("columns_generated", 0),
            "wall_ms": payload.get("wall_ms", 0.0),
            "mode": args.mode,
        })
    violations, notes = _ordering_checks(rows)
    report = {
        "instance": inst.name,
        "mode": args.mode,
        "rows": rows,
        "violations": violations,
        "notes": notes,
    }
    out = args.out or f"{inst.name}_sweep_{args.mode}.report.json"
    _write_json(out, report)
    print(format_sweep_table(report))
    print(f"report file: {out}")
    if infeasible:
        return EXIT_INFEASIBLE
    return EXIT_VALIDATION if violations else EXIT_OK


def format_sweep_table(report: dict) -> str:
    """Deterministic rendering of a sweep report (reprinting a re-read
    report file yields the identical table)."""
    head = f"{'p':>4}  {'bound':>16}  {'iters':>6}  {'cols':>6}  {'wall ms':>9}  {'mode':<8}  flags"
    lines = [f"sweep: {report['instance']}", head, "-" * len(head)]
    flagged = {}
    for v in report["violations"]:
        flagged.setdefault(v.get("p"), []).append("VIOLATION:" + v["kind"])
    for nte in report["notes"]:
        flagged.setdefault(nte.get("p"), []).append(nte["kind"])
    for row in report["rows"]:
        b = "infeasible" if row["bound"] is None else f"{row['bound']:.9g}"
        fl = ",".join(flagged.get(row["p"], []))
        lines.append(
            f"{row['p']:>4}  {b:>16}  {row['iterations']:>6}  "
            f"{row['columns']:>6}  {row['wall_ms']:>9.1f}  {row['mode']:<8}  {fl}"
        )
    if report["violations"]:
        lines.append(f"ordering violations: {len(report['violations'])}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args) -> int:
    if args.kind == "prop4":
        spec = SyntheticSpec(p=args.p, q=args.q, k=args.k, m=args.q + 1,
                             intra=args.intra, depot_dist=args.depot_dist)
        inst = generate_prop4(spec)
    elif args.kind == "prop5":
        if args.m is None:
            raise UsageError("prop5 requires --m")
        spec = SyntheticSpec(p=args.p, q=args.q, k=args.k, m=args.m,
                             intra=args.intra, depot_dist=args.depot_dist)
        inst = generate_prop5(spec)
    elif args.kind == "random":
        inst = generate_random(args.n, seed=args.seed, tw=args.tw,
                               tightness=args.tightness)
    else:
        raise UsageError(f"unknown generator {args.kind!r}")
    out = args.out or f"{inst.name}.json"
    inst.save(out)
    print(f"wrote {out}  (n={inst.n}, Q={inst.Q:.6g}, K={inst.K})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate


def _corpus(seed: int, n_max: int, tw: bool = False) -> List[Instance]:
    out = []
    for i, n in enumerate(range(4, n_max + 1)):
        out.append(generate_random(n, seed=seed + i, tw=tw,
                                   tightness=1.0 / 3.0 if n >= 6 else 1.0 / 4.0))
    return out


def _check(name: str, ok: bool, detail: str = "") -> bool:
    print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
    return ok


def _suite_equivalence(seed: int, n_max: int) -> bool:
    ok = True
    for inst in _corpus(seed, n_max):
        vf = lpmod.solve_lp(build_vf_model(inst).lp).objective
        z1 = cg.solve_relaxation(inst, cg.ColGenConfig(p=1)).bound
        ok &= _check(f"{inst.name}: p=1 colgen vs arc-flow LP",
                     abs(z1 - vf) <= 1e-6 * (1 + abs(vf)), f"{z1:.8g} vs {vf:.8g}")
        zsp = oracle.sp_lp_bound(inst)
        ztop = cg.solve_relaxation(inst, cg.ColGenConfig(p=inst.n + 1)).bound
        ok &= _check(f"{inst.name}: p=n+1 colgen vs route-partition LP",
                     abs(ztop - zsp) <= 1e-6 * (1 + abs(zsp)),
                     f"{ztop:.8g} vs {zsp:.8g}")
    return ok


def _suite_orderings(seed: int, n_max: int) -> bool:
    ok = True
    for inst in _corpus(seed, min(n_max, 6)):
        bounds = {p: oracle.explicit_bound(inst, p) for p in range(1, inst.n + 2)}
        good = True
        for p in bounds:
            for q in range(2, inst.n + 2):
                if p * q in bounds:
                    good &= bounds[p * q] >= bounds[p] - ORDER_RTOL * abs(bounds[p])
            good &= bounds[p] >= bounds[1] - ORDER_RTOL * abs(bounds[1])
            good &= bounds[inst.n + 1] >= bounds[p] - ORDER_RTOL * abs(bounds[p])
        ok &= _check(f"{inst.name}: multiple/floor/ceiling orderings", good)
    i4 = generate_prop4(SyntheticSpec(p=2, q=1, k=1, m=2))
    z2, z3 = oracle.explicit_bound(i4, 2), oracle.explicit_bound(i4, 3)
    ok &= _check("clustered reversal (4 customers): z3 < z2",
                 z3 <= 4.0 / 3.0 + 1e-9 and z2 >= 2.0 - 1e-9,
                 f"z3={z3:.8g} z2={z2:.8g}")
    i5 = generate_prop5(SyntheticSpec(p=2, q=1, k=1, m=2))
    w2, w3 = oracle.explicit_bound(i5, 2), oracle.explicit_bound(i5, 3)
    ok &= _check("clustered reversal (6 customers): z3 > z2",
                 abs(w2) <= 1e-9 and w3 >= 2.0 - 1e-9,
                 f"z2={w2:.8g} z3={w3:.8g}")
    return ok


def _suite_pricing(seed: int, n_max: int) -> bool:
    ok = True
    rng = np.random.default_rng(seed)
    uncapped = PricingConfig(tol=1e-6, max_columns_per_round=10 ** 9,
                             per_start_best=10 ** 9)
    for inst in _corpus(seed, min(n_max, 7)):
        pools = {p: oracle.enumerate_psteps(inst, p) for p in (1, 2, inst.n + 1)}
        good = True
        for _ in range(100):
            duals = oracle.random_duals(inst, rng)
            for p, pool in pools.items():
                brute = oracle.min_rc_bruteforce(inst, p, duals, pool=pool)
                cols, stats = price_with_stats(inst, p, duals, uncapped)
                good &= abs(stats.min_rc - brute) <= 1e-9
                good &= (len(cols) == 0) == (brute >= -1e-6)
        ok &= _check(f"{inst.name}: pricing matches exhaustive reduced costs", good)
    return ok


def _suite_certificates(seed: int, n_max: int) -> bool:
    ok = True
    for inst in _corpus(seed, min(n_max, 7)):
        routes, sol = oracle.sp_lp(inst)
        lams = [float(sol.x[t]) for t in range(len(routes))]
        try:
            oracle.phi_certificate(inst, routes, lams)
            passed = True
        except oracle.CertificateError:
            passed = False
        ok &= _check(f"{inst.name}: load-variable certificate", passed)
        model, msol = oracle.explicit_master(inst, 4)
        pool, lams = [], []
        for entry, val in model.lambda_values(msol):
            if isinstance(entry, PStepColumn):
                pool.append(entry)
                lams.append(val)
        try:
            oracle.cut_solution(inst, pool, lams, 2)
            passed = True
        except oracle.CuttingError:
            passed = False
        ok &= _check(f"{inst.name}: cut 4-step solution into 2-steps", passed)
    return ok


def cmd_validate(args) -> int:
    suites = {
        "equivalence": _suite_equivalence,
        "orderings": _suite_orderings,
        "pricing": _suite_pricing,
        "certificates": _suite_certificates,
    }
    names = list(suites) if args.suite == "all" else [args.suite]
    ok = True
    for name in names:
        print(f"== suite: {name}")
        ok &= suites[name](args.seed, args.n_max)
    print("validation:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_VALIDATION


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="pstep", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve one relaxation")
    ps.add_argument("--instance", required=True)
    ps.add_argument("--p", type=int, required=True)
    ps.add_argument("--tw", action="store_true")
    ps.add_argument("--mode", choices=["colgen", "explicit", "vf"],
                    default="colgen")
    ps.add_argument("--out")
    ps.add_argument("--workers", type=int, default=_default_workers())
    ps.add_argument("--dump-lp", help="write the model in LP text format")
    ps.set_defaults(func=cmd_solve)

    pw = sub.add_parser("sweep", help="bounds across step sizes")
    pw.add_argument("--instance", required=True)
    pw.add_argument("--p-list")
    pw.add_argument("--mode", choices=["colgen", "explicit"], default="colgen")
    pw.add_argument("--out")
    pw.add_argument("--workers", type=int, default=_default_workers())
    pw.set_defaults(func=cmd_sweep)

    pg = sub.add_parser("generate", help="write a synthetic instance file")
    pg.add_argument("kind", choices=["prop4", "prop5", "random"])
    pg.add_argument("--p", type=int, default=2)
    pg.add_argument("--q", type=int, default=1)
    pg.add_argument("--k", type=int, default=1)
    pg.add_argument("--m", type=int)
    pg.add_argument("--intra", type=float, default=0.0)
    pg.add_argument("--depot-dist", type=float)
    pg.add_argument("--n", type=int, default=6)
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--tw", action="store_true")
    pg.add_argument("--tightness", type=float, default=1.0 / 3.0)
    pg.add_argument("--out")
    pg.set_defaults(func=cmd_generate)

    pv = sub.add_parser("validate", help="run oracle-backed check suites")
    pv.add_argument("--suite", default="all",
                    choices=["equivalence", "orderings", "pricing",
                             "certificates", "all"])
    pv.add_argument("--seed", type=int, default=2024)
    pv.add_argument("--n-max", type=int, default=8)
    pv.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (InstanceError, lpmod.LpError, oracle.BudgetError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
