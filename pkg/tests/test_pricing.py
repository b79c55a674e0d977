import numpy as np
import pytest

from pstep.formulation import DualSolution, column_from_path, reduced_cost
from pstep.instance import Instance, generate_random
from pstep.oracle import enumerate_psteps, min_rc_bruteforce, random_duals
from pstep.pricing import (
    Label,
    PricingConfig,
    dominates,
    modified_arc_cost,
    price,
    price_with_stats,
)

UNCAPPED = PricingConfig(tol=1e-6, max_columns_per_round=10 ** 9,
                         per_start_best=10 ** 9)


def _ample(n=4, Q=None):
    nn = n + 2
    c = np.ones((nn, nn))
    np.fill_diagonal(c, 0.0)
    q = np.ones(nn)
    q[0] = q[nn - 1] = 0.0
    return Instance(name=f"unit{n}", n=n, Q=float(Q or n), K=n, q=q, c=c,
                    t=c.copy(), s=np.zeros(nn), tw=None)


def _zero_duals(inst):
    nn = inst.n + 2
    return DualSolution(u1=np.zeros(nn), u2=np.zeros(nn), u3=0.0,
                        u4=np.zeros((nn, nn)), u5=np.zeros((nn, nn)))


# ---------------------------------------------------------------------------
# modified_arc_cost


def test_modified_cost_zero_duals():
    inst = _ample()
    duals = _zero_duals(inst)
    assert modified_arc_cost(inst, duals, 1, 2) == pytest.approx(inst.c[1, 2])


def test_modified_cost_u4_sign_unfolding():
    inst = _ample()
    duals = _zero_duals(inst)
    u4 = np.zeros((6, 6))
    u4[1, 2] = -1.0
    duals = DualSolution(u1=duals.u1, u2=duals.u2, u3=0.0, u4=u4)
    expect = inst.c[1, 2] + inst.q[2] + inst.Q
    assert modified_arc_cost(inst, duals, 1, 2) == pytest.approx(expect)


def test_modified_cost_rejects_illegal_arc():
    inst = _ample()
    duals = _zero_duals(inst)
    for arc in ((5, 1), (1, 0), (2, 2), (0, 5)):
        with pytest.raises(ValueError):
            modified_arc_cost(inst, duals, *arc)


def test_arc_sum_plus_endpoint_terms_equals_reduced_cost():
    inst = generate_random(6, seed=3)
    rng = np.random.default_rng(1)
    duals = random_duals(inst, rng)
    col = column_from_path(inst, (2, 5, 1), p=2)
    arc_sum = sum(modified_arc_cost(inst, duals, i, j) for i, j in col.arcs())
    expect = arc_sum - duals.u2[2] + duals.u2[1]
    assert reduced_cost(inst, duals, col) == pytest.approx(expect, abs=1e-12)


# ---------------------------------------------------------------------------
# dominance


def _lab(start, node, steps, load, rc, visited, time=0.0):
    return Label(start=start, node=node, steps=steps, load=load, time=time,
                 visited=visited, rc=rc)


def test_identical_labels_do_not_dominate():
    a = _lab(1, 2, 1, 1.0, -3.0, 0b110)
    b = _lab(1, 2, 1, 1.0, -3.0, 0b110)
    assert not dominates(a, b)


def test_single_coordinate_dominance():
    a = _lab(1, 2, 1, 1.0, -4.0, 0b110)
    b = _lab(1, 2, 1, 1.0, -3.0, 0b110)
    assert dominates(a, b)
    assert not dominates(b, a)


def test_visited_superset_blocks_dominance():
    a = _lab(1, 2, 2, 2.0, -30.0, 0b01110)   # visited {1,2,3}
    b = _lab(1, 2, 2, 2.0, -20.0, 0b10110)   # visited {1,2,4}
    assert not dominates(a, b)
    assert not dominates(b, a)


def test_dominance_precondition():
    a = _lab(1, 2, 1, 1.0, -3.0, 0b110)
    b = _lab(1, 3, 1, 1.0, -3.0, 0b1010)
    with pytest.raises(ValueError):
        dominates(a, b)


def test_time_coordinate_matters():
    a = _lab(1, 2, 1, 1.0, -3.0, 0b110, time=5.0)
    b = _lab(1, 2, 1, 1.0, -3.0, 0b110, time=2.0)
    assert not dominates(a, b)
    assert dominates(b, a)


def _crafted_duals(inst):
    """Modified costs engineered so the unique cheapest 3-step extends a
    label that a visited-blind dominance rule would prune."""
    targets = {
        (1, 3): -25.0, (1, 4): -10.0, (1, 2): 100.0, (1, 5): 100.0,
        (2, 3): -50.0, (2, 1): 5.0, (2, 4): 5.0, (2, 5): 5.0,
        (3, 2): -5.0, (3, 1): 100.0, (3, 4): 100.0, (3, 5): 100.0,
        (4, 2): -10.0, (4, 1): 100.0, (4, 3): 100.0, (4, 5): 100.0,
        (0, 1): 121.0, (0, 2): 121.0, (0, 3): 121.0, (0, 4): 121.0,
    }
    u1 = np.array([0.0, 26.0, 51.0, 6.0, 11.0, 0.0])
    u4 = np.zeros((6, 6))
    for (i, j), target in targets.items():
        base = inst.c[i, j] - u1[i]
        raise_by = target - base
        assert raise_by >= -1e-9
        u4[i, j] = -raise_by / (inst.q[j] + inst.Q)
    return DualSolution(u1=u1, u2=np.zeros(6), u3=0.0, u4=u4)


def test_crafted_instance_needs_visited_subset_rule():
    inst = _ample(4, Q=4)
    duals = _crafted_duals(inst)
    # the two competing labels at (start=1, node=2, steps=2)
    a = _lab(1, 2, 2, 2.0, -30.0, 0b01110)   # path 1-3-2
    b = _lab(1, 2, 2, 2.0, -20.0, 0b10110)   # path 1-4-2
    assert a.rc < b.rc and not dominates(a, b)
    # completions: pruning b would lose the unique optimum
    best_a = min(
        reduced_cost(inst, duals, column_from_path(inst, (1, 3, 2, j), 3))
        for j in (4, 5)
    )
    best_b = min(
        reduced_cost(inst, duals, column_from_path(inst, (1, 4, 2, j), 3))
        for j in (3, 5)
    )
    assert best_b < best_a - 10.0
    brute = min_rc_bruteforce(inst, 3, duals)
    assert brute == pytest.approx(best_b, abs=1e-9)
    cols, stats = price_with_stats(inst, 3, duals, UNCAPPED)
    assert stats.min_rc == pytest.approx(brute, abs=1e-9)
    assert cols[0].path == (1, 4, 2, 3)


# ---------------------------------------------------------------------------
# price


def test_zero_duals_nonnegative_costs_price_empty():
    inst = _ample(4)
    assert price(inst, 2, _zero_duals(inst)) == []


def test_large_visit_dual_prices_out_arcs():
    inst = generate_random(5, seed=2)
    nn = inst.n + 2
    u1 = np.zeros(nn)
    u1[1] = 2.0 * inst.c.max()
    duals = DualSolution(u1=u1, u2=np.zeros(nn), u3=0.0, u4=np.zeros((nn, nn)))
    cols = price(inst, 1, duals, UNCAPPED)
    assert cols, "arcs out of customer 1 must price negative"
    assert {c.path[0] for c in cols} == {1}
    expect = {(1, j) for j in range(2, inst.sink + 1)}
    assert {c.path for c in cols} == expect
    rcs = [reduced_cost(inst, duals, c) for c in cols]
    assert rcs == sorted(rcs)
    assert all(rc == pytest.approx(inst.c[c.path[0], c.path[1]] - u1[1])
               for rc, c in zip(rcs, cols))


@pytest.mark.parametrize("p", [1, 2, 4, 7])
def test_min_rc_matches_bruteforce(p):
    inst = generate_random(6, seed=19)
    rng = np.random.default_rng(p)
    pool = enumerate_psteps(inst, p)
    for _ in range(25):
        duals = random_duals(inst, rng)
        brute = min_rc_bruteforce(inst, p, duals, pool=pool)
        cols, stats = price_with_stats(inst, p, duals, UNCAPPED)
        assert stats.min_rc == pytest.approx(brute, abs=1e-9)
        assert (len(cols) == 0) == (brute >= -1e-6)
        if cols:
            assert reduced_cost(inst, duals, cols[0]) == pytest.approx(
                brute, abs=1e-9
            )


def test_all_emitted_columns_are_sound():
    inst = generate_random(6, seed=19)
    rng = np.random.default_rng(77)
    duals = random_duals(inst, rng)
    for p in (2, 3, 7):
        for col in price(inst, p, duals, UNCAPPED):
            rebuilt = column_from_path(inst, col.path, p)  # raises on violation
            assert rebuilt.cost == pytest.approx(col.cost)
            assert reduced_cost(inst, duals, col) < -1e-6
            if col.first != 0:
                assert col.k == p
            else:
                assert 1 <= col.k <= p


def test_caps_do_not_change_emptiness_only_size():
    inst = generate_random(6, seed=19)
    rng = np.random.default_rng(5)
    duals = random_duals(inst, rng)
    full = price(inst, 3, duals, UNCAPPED)
    capped = price(inst, 3, duals,
                   PricingConfig(tol=1e-6, max_columns_per_round=3,
                                 per_start_best=1))
    assert len(capped) <= 3
    assert (len(capped) == 0) == (len(full) == 0)
    if full:
        assert capped[0].path == full[0].path  # best column survives capping


def test_worker_count_invariance():
    inst = generate_random(7, seed=23)
    rng = np.random.default_rng(9)
    for _ in range(10):
        duals = random_duals(inst, rng)
        ref = price(inst, 3, duals,
                    PricingConfig(tol=1e-6, max_columns_per_round=50,
                                  per_start_best=5, workers=1))
        par = price(inst, 3, duals,
                    PricingConfig(tol=1e-6, max_columns_per_round=50,
                                  per_start_best=5, workers=4))
        assert [c.path for c in ref] == [c.path for c in par]


def test_tw_columns_pass_arrival_recheck():
    inst = generate_random(6, seed=41, tw=True)
    rng = np.random.default_rng(13)
    seen = 0
    for _ in range(20):
        duals = random_duals(inst, rng, tw=True)
        for col in price(inst, 3, duals, UNCAPPED, tw=True):
            seen += 1
            t = inst.tw[col.path[0], 0]
            for i, j in col.arcs():
                t = max(inst.tw[j, 0], t + inst.s[i] + inst.t[i, j])
                assert t <= inst.tw[j, 1] + 1e-9
    assert seen > 0


def test_tw_min_rc_matches_bruteforce():
    inst = generate_random(5, seed=43, tw=True)
    rng = np.random.default_rng(17)
    for p in (2, 4):
        pool = enumerate_psteps(inst, p)
        for _ in range(20):
            duals = random_duals(inst, rng, tw=True)
            brute = min_rc_bruteforce(inst, p, duals, tw=True, pool=pool)
            _, stats = price_with_stats(inst, p, duals, UNCAPPED, tw=True)
            assert stats.min_rc == pytest.approx(brute, abs=1e-9)
