"""Problem instances: data model, file parsing, synthetic generators.

Node convention: a single depot is duplicated into node 0 (every route
starts there) and node n+1 (every route ends there); customers are
1..n.  Costs and times are stored as explicit (n+2) x (n+2) matrices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


class InstanceError(ValueError):
    """Base class for instance construction problems."""


class ParseError(InstanceError):
    """Malformed instance text; carries a line number when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(InstanceError):
    """An invariant violation; names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Instance:
    """A CVRP/VRPTW instance over nodes 0..n+1 (0 and n+1 are the depot).

    q, s have length n+2 (zero at both depot copies); c and t are
    (n+2) x (n+2) with zero diagonal; tw is an optional (n+2) x 2 array
    of [earliest, latest] service-start windows.
    """

    name: str
    n: int
    Q: float
    K: int
    q: np.ndarray
    c: np.ndarray
    t: np.ndarray
    s: np.ndarray
    tw: Optional[np.ndarray] = None
    coords: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "q", _frozen(self.q))
        object.__setattr__(self, "c", _frozen(self.c))
        object.__setattr__(self, "t", _frozen(self.t))
        object.__setattr__(self, "s", _frozen(self.s))
        if self.tw is not None:
            object.__setattr__(self, "tw", _frozen(self.tw))
        if self.coords is not None:
            object.__setattr__(self, "coords", _frozen(self.coords))
        self._validate()

    def _validate(self):
        n, m = self.n, self.n + 2
        if n < 1:
            raise ValidationError("n", "need at least one customer")
        if self.K < 1:
            raise ValidationError("K", "fleet size must be >= 1")
        if self.q.shape != (m,):
            raise ValidationError("demands", f"expected length {m}, got {self.q.shape}")
        if self.q[0] != 0 or self.q[n + 1] != 0:
            raise ValidationError("demands", "depot copies must have zero demand")
        for i in range(1, n + 1):
            if self.q[i] <= 0:
                raise ValidationError("demands", f"customer {i} needs positive demand")
        if self.q.max() > self.Q:
            raise ValidationError("Q", "a single demand exceeds vehicle capacity")
        for label, mat in (("cost", self.c), ("time", self.t)):
            if mat.shape != (m, m):
                raise ValidationError(label, f"expected {m}x{m} matrix")
            if (mat < 0).any():
                raise ValidationError(label, "entries must be nonnegative")
            if np.abs(np.diag(mat)).max() > 0:
                raise ValidationError(label, "diagonal must be zero")
        if self.s.shape != (m,):
            raise ValidationError("service", f"expected length {m}")
        if (self.s < 0).any():
            raise ValidationError("service", "entries must be nonnegative")
        if self.s[0] != 0 or self.s[n + 1] != 0:
            raise ValidationError("service", "depot copies must have zero service time")
        if self.tw is not None:
            if self.tw.shape != (m, 2):
                raise ValidationError("windows", f"expected {m}x2 array")
            if (self.tw[:, 0] > self.tw[:, 1]).any():
                bad = int(np.argmax(self.tw[:, 0] > self.tw[:, 1]))
                raise ValidationError("windows", f"node {bad} has earliest > latest")

    # -- structural helpers ------------------------------------------------

    @property
    def sink(self) -> int:
        return self.n + 1

    @property
    def has_tw(self) -> bool:
        return self.tw is not None

    def customers(self) -> range:
        return range(1, self.n + 1)

    def nodes(self) -> range:
        return range(0, self.n + 2)

    def is_legal_arc(self, i: int, j: int) -> bool:
        """Arcs leave any node but the sink, enter any node but the origin,
        and the empty-route arc origin->sink is excluded."""
        if i == j or i == self.sink or j == 0:
            return False
        if i == 0 and j == self.sink:
            return False
        return 0 <= i <= self.n and 1 <= j <= self.sink

    def legal_arcs(self):
        for i in range(0, self.n + 1):
            for j in range(1, self.n + 2):
                if self.is_legal_arc(i, j):
                    yield (i, j)

    def big_m(self, i: int, j: int) -> float:
        """Big-M constant for service-start propagation on arc (i, j)."""
        if self.tw is None:
            raise InstanceError("big_m requires time windows")
        return max(self.tw[i, 1] - self.tw[j, 0], 0.0)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "n": self.n,
            "Q": self.Q,
            "K": self.K,
            "demands": self.q.tolist(),
            "cost": self.c.tolist(),
            "time": self.t.tolist(),
            "service": self.s.tolist(),
        }
        if self.tw is not None:
            out["windows"] = self.tw.tolist()
        return out

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=1, sort_keys=True)
            f.write("\n")


# ---------------------------------------------------------------------------
# Parsing


def parse_instance(text: str, fmt: str = "native") -> Instance:
    """Parse instance text in the named format ("native" or "solomon")."""
    if fmt == "native":
        return _parse_native(text)
    if fmt == "solomon":
        return _parse_solomon(text)
    raise ParseError(f"unknown format {fmt!r}")


def load_instance(path, fmt: Optional[str] = None) -> Instance:
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    if fmt is None:
        fmt = "solomon" if str(path).endswith(".txt") else "native"
    return parse_instance(text, fmt)


def _parse_native(text: str) -> Instance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno) from e
    if not isinstance(data, dict):
        raise ParseError("top level must be an object")
    try:
        n = int(data["n"])
        obj = {
            "name": str(data.get("name", "unnamed")),
            "n": n,
            "Q": float(data["Q"]),
            "K": int(data["K"]),
            "q": np.asarray(data["demands"], dtype=float),
            "c": np.asarray(data["cost"], dtype=float),
        }
    except KeyError as e:
        raise ParseError(f"missing required key {e.args[0]!r}") from e
    obj["t"] = (
        np.asarray(data["time"], dtype=float) if "time" in data else obj["c"].copy()
    )
    obj["s"] = (
        np.asarray(data["service"], dtype=float)
        if "service" in data
        else np.zeros(n + 2)
    )
    tw = data.get("windows")
    return Instance(tw=None if tw is None else np.asarray(tw, dtype=float), **obj)


def _parse_solomon(text: str) -> Instance:
    """Parse the standard Solomon 100-series layout.

    Distances and travel times are Euclidean, truncated (not rounded) to
    one decimal, the convention used for published best-known values.
    """
    lines = text.splitlines()
    name = None
    k = None
    Q = None
    rows = []
    section = None
    for idx, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        if name is None:
            name = stripped
            continue
        upper = stripped.upper()
        if upper.startswith("VEHICLE"):
            section = "vehicle"
            continue
        if upper.startswith("CUSTOMER"):
            section = "customer"
            continue
        if upper.startswith("NUMBER") or upper.startswith("CUST"):
            continue
        parts = stripped.split()
        if section == "vehicle":
            if len(parts) != 2:
                raise ParseError("expected 'NUMBER CAPACITY'", line=idx)
            try:
                k, Q = int(parts[0]), float(parts[1])
            except ValueError as e:
                raise ParseError(str(e), line=idx) from e
        elif section == "customer":
            if len(parts) < 7:
                raise ParseError("customer row needs 7 columns", line=idx)
            try:
                rows.append([float(v) for v in parts[:7]])
            except ValueError as e:
                raise ParseError(str(e), line=idx) from e
        else:
            raise ParseError("text outside any section", line=idx)
    if k is None or Q is None:
        raise ParseError("missing VEHICLE section")
    if len(rows) < 2:
        raise ParseError("need a depot row and at least one customer")
    n = len(rows) - 1
    coords = np.zeros((n + 2, 2))
    q = np.zeros(n + 2)
    s = np.zeros(n + 2)
    tw = np.zeros((n + 2, 2))
    for node, row in enumerate(rows):
        _, x, y, dem, ready, due, service = row
        coords[node] = (x, y)
        q[node] = dem
        tw[node] = (ready, due)
        s[node] = service
    coords[n + 1] = coords[0]
    tw[n + 1] = tw[0]
    q[n + 1] = s[n + 1] = q[0] = s[0] = 0.0
    c = _truncated_euclidean(coords)
    return Instance(
        name=name or "solomon", n=n, Q=Q, K=k, q=q, c=c, t=c.copy(), s=s,
        tw=tw, coords=coords,
    )


def _truncated_euclidean(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    d = np.sqrt((diff ** 2).sum(axis=2))
    return np.floor(d * 10.0) / 10.0


# ---------------------------------------------------------------------------
# Synthetic generators


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for the clustered polygon generators.

    p is the step budget the construction targets, p_prime = q*p + k is
    the competing non-multiple step count, and m counts clusters placed
    on the vertices of a regular m-polygon with the given edge length.
    """

    p: int
    q: int
    k: int
    m: int
    intra: float = 0.0
    edge: float = 1.0
    depot_dist: Optional[float] = None

    def __post_init__(self):
        if self.p < 2:
            raise ValidationError("p", "need p >= 2")
        if self.q < 1:
            raise ValidationError("q", "need q >= 1")
        if not 1 <= self.k < self.p:
            raise ValidationError("k", "need 1 <= k < p")
        if self.m < 1:
            raise ValidationError("m", "need m >= 1")
        if not self.intra < self.edge:
            raise ValidationError("intra", "intra-cluster distance must be < edge")

    @property
    def p_prime(self) -> int:
        return self.q * self.p + self.k


def _polygon_chords(m: int, edge: float) -> np.ndarray:
    """chords[d] = distance between polygon vertices d apart (0 <= d < m)."""
    if m == 1:
        return np.zeros(1)
    if m == 2:
        return np.array([0.0, edge])
    radius = edge / (2.0 * math.sin(math.pi / m))
    return np.array([2.0 * radius * math.sin(math.pi * d / m) for d in range(m)])


def _clustered_instance(
    name: str, m: int, cluster_size: int, spec: SyntheticSpec, default_depot: float
) -> Instance:
    n = m * cluster_size
    chords = _polygon_chords(m, spec.edge)
    diameter = chords.max() if m > 1 else 0.0
    depot_dist = spec.depot_dist
    if depot_dist is None:
        depot_dist = default_depot if default_depot > 0 else 2.0 * diameter + 1.0
    if m > 1 and depot_dist <= diameter:
        raise ValidationError("depot_dist", "depot must be farther than any cluster pair")
    c = np.zeros((n + 2, n + 2))
    cluster = lambda i: (i - 1) // cluster_size  # customers are 1-based
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i == j:
                continue
            ci, cj = cluster(i), cluster(j)
            if ci == cj:
                c[i, j] = spec.intra
            else:
                d = abs(ci - cj)
                c[i, j] = chords[min(d, m - d)]
        c[0, i] = c[i, 0] = c[i, n + 1] = c[n + 1, i] = depot_dist
    q = np.ones(n + 2)
    q[0] = q[n + 1] = 0.0
    return Instance(
        name=name, n=n, Q=float(n), K=n, q=q, c=c, t=c.copy(),
        s=np.zeros(n + 2), tw=None,
    )


def generate_prop4(spec: SyntheticSpec) -> Instance:
    """Clustered instance on which the longer non-multiple step budget
    yields a strictly weaker relaxation: q+1 clusters of exactly p nodes,
    so every p-step must pay for at least one unit-length arc.
    """
    if spec.m != spec.q + 1:
        raise ValidationError("m", f"construction requires m = q+1 = {spec.q + 1}")
    name = f"prop4_p{spec.p}q{spec.q}k{spec.k}"
    return _clustered_instance(name, spec.m, spec.p, spec, default_depot=0.0)


def generate_prop5(spec: SyntheticSpec) -> Instance:
    """Clustered instance on which the longer step budget is strictly
    stronger: clusters of p+1 nodes admit zero-cost p-steps while every
    (qp+k)-step must leave a cluster or touch the far-away depot.
    """
    n = spec.m * (spec.p + 1)
    if n < spec.p_prime:
        raise ValidationError("m", f"need m*(p+1) >= {spec.p_prime}, got {n}")
    name = f"prop5_p{spec.p}q{spec.q}k{spec.k}m{spec.m}"
    return _clustered_instance(name, spec.m, spec.p + 1, spec, default_depot=10.0)


def generate_random(
    n: int, seed: int, tw: bool = False, tightness: float = 1.0 / 3.0
) -> Instance:
    """Reproducible random instance on a 100x100 integer grid.

    Capacity is derived from `tightness` so an average route carries
    about 1/tightness customers; requires tightness > 1/6.  With tw=True
    every customer window contains its direct depot travel time, so the
    single-customer round trip is always feasible.
    """
    if n < 1:
        raise ValidationError("n", "need n >= 1")
    if tightness <= 1.0 / 6.0 or tightness > 1.0:
        raise ValidationError("tightness", "supported range is (1/6, 1]")
    rng = np.random.default_rng(seed)
    coords = np.zeros((n + 2, 2))
    coords[: n + 1] = rng.integers(0, 101, size=(n + 1, 2))
    coords[n + 1] = coords[0]
    diff = coords[:, None, :] - coords[None, :, :]
    c = np.sqrt((diff ** 2).sum(axis=2))
    Q = max(3, round(3.0 / (6.0 * tightness - 1.0)))
    dmax = max(1, math.ceil(Q / 3.0))
    q = np.zeros(n + 2)
    q[1 : n + 1] = rng.integers(1, dmax + 1, size=n)
    s = np.zeros(n + 2)
    windows = None
    if tw:
        s[1 : n + 1] = rng.integers(1, 6, size=n)
        windows = np.zeros((n + 2, 2))
        scale = max(c[0, 1 : n + 1].max(), 1.0)
        for i in range(1, n + 1):
            width = rng.uniform(0.3, 1.0) * scale
            a = max(0.0, c[0, i] - rng.uniform(0.0, width))
            windows[i] = (a, a + width)
        # widen closings until every legal arc admits earliest-arrival
        # traversal: the single-arc column set then matches the arc-flow
        # variable grid, which the p=1 equivalence checks rely on
        for j in range(1, n + 1):
            reach = max(
                windows[i, 0] + s[i] + c[i, j]
                for i in range(0, n + 1)
                if i != j
            )
            windows[j, 1] = max(windows[j, 1], reach)
        horizon = max(windows[i, 1] + s[i] + c[i, n + 1] for i in range(1, n + 1))
        windows[0] = windows[n + 1] = (0.0, math.ceil(horizon) + 1.0)
    name = f"rnd{n}s{seed}" + ("tw" if tw else "")
    return Instance(
        name=name, n=n, Q=float(Q), K=n, q=q, c=c, t=c.copy(), s=s,
        tw=windows, coords=coords,
    )
