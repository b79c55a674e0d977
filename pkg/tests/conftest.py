"""Shared corpora and a session-wide bound cache.

The seeded corpus pins 20 random instances with n in 4..8; capacity
tightness keeps route lengths short enough that exhaustive enumeration
stays cheap at every step size.
"""

import pytest

from pstep import generate_random
from pstep.colgen import ColGenConfig, solve_relaxation
from pstep.oracle import explicit_bound

CORPUS_SPEC = [
    (n, 100 + 10 * n + i, 0.25 if n <= 5 else 1.0 / 3.0)
    for n in (4, 5, 6, 7, 8)
    for i in range(4)
]

TW_CORPUS_SPEC = [
    (n, 300 + 10 * n + i, 0.25 if n <= 5 else 1.0 / 3.0)
    for n, count in ((4, 3), (5, 3), (6, 2), (7, 2))
    for i in range(count)
]


@pytest.fixture(scope="session")
def corpus():
    return [
        generate_random(n, seed=s, tightness=t) for (n, s, t) in CORPUS_SPEC
    ]


@pytest.fixture(scope="session")
def tw_corpus():
    return [
        generate_random(n, seed=s, tw=True, tightness=t)
        for (n, s, t) in TW_CORPUS_SPEC
    ]


class BoundCache:
    """Memoizes explicit and column-generation bounds per (instance, p)."""

    def __init__(self):
        self._explicit = {}
        self._colgen = {}

    def explicit(self, inst, p):
        key = (inst.name, p)
        if key not in self._explicit:
            self._explicit[key] = explicit_bound(inst, p)
        return self._explicit[key]

    def colgen(self, inst, p, tw=False):
        key = (inst.name, p)
        if key not in self._colgen:
            res = solve_relaxation(inst, ColGenConfig(p=p), tw=tw)
            assert res.status == "optimal" and res.feasible, (inst.name, p)
            self._colgen[key] = res.bound
        return self._colgen[key]


@pytest.fixture(scope="session")
def bounds():
    return BoundCache()


@pytest.fixture(scope="session")
def tw_bounds():
    return BoundCache()


def rel_close(a, b, rtol=1e-6):
    return abs(a - b) <= rtol * max(1.0, abs(a), abs(b))
