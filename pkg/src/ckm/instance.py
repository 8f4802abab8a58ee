"""Problem instances, metrics, assignments and cost evaluation.

All points live in one indexed universe. For a base instance facilities
occupy indices ``0 .. n_facilities-1`` and clients the next ``n_clients``
indices; derived metrics (centered, rounded, tree) reuse the same indices and
may append extra points after them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import StructuralError

TOL = 1e-9


@dataclass(frozen=True)
class Metric:
    """Symmetric distance table over ``size`` points.

    The array is copied and frozen on construction, so a Metric can be
    shared freely between solvers and threads.
    """

    dist: np.ndarray

    def __post_init__(self):
        arr = np.array(self.dist, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise StructuralError(f"distance table must be square, got shape {arr.shape}")
        if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0):
            raise StructuralError("distances must be finite and nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "dist", arr)

    @property
    def size(self) -> int:
        return self.dist.shape[0]

    def __call__(self, u: int, v: int) -> float:
        return float(self.dist[u, v])

    def restrict(self, points: Sequence[int]) -> Metric:
        idx = np.asarray(points, dtype=int)
        return Metric(self.dist[np.ix_(idx, idx)])

    def scaled(self, alpha: float) -> Metric:
        return Metric(self.dist * alpha)

    def violations(self, triangle: bool = True, tol: float = TOL) -> list[str]:
        """Describe every broken metric axiom (empty list means a valid metric)."""
        d = self.dist
        out = []
        for u in np.flatnonzero(np.abs(np.diag(d)) > tol):
            out.append(f"nonzero diagonal at point {u}: {d[u, u]}")
        asym = np.argwhere(np.abs(d - d.T) > tol)
        for u, v in asym[asym[:, 0] < asym[:, 1]]:
            out.append(f"asymmetric pair ({u}, {v}): {d[u, v]} != {d[v, u]}")
        if triangle:
            # d[u, w] > d[u, v] + d[v, w], vectorised over the middle point
            for v in range(self.size):
                bad = np.argwhere(d > d[:, [v]] + d[[v], :] + tol)
                for u, w in bad[:3]:
                    out.append(
                        f"triangle inequality broken: d({u},{w})={d[u, w]} > "
                        f"d({u},{v})+d({v},{w})={d[u, v] + d[v, w]}"
                    )
        return out


@dataclass(frozen=True)
class Instance:
    """A capacitated k-median instance over a single point universe."""

    metric: Metric
    capacities: tuple[int, ...]
    n_clients: int
    k: int

    def __post_init__(self):
        caps = tuple(int(u) for u in self.capacities)
        object.__setattr__(self, "capacities", caps)
        if any(u < 0 for u in caps):
            raise StructuralError("capacities must be nonnegative integers")
        if self.n_clients < 0:
            raise StructuralError("n_clients must be nonnegative")
        if self.metric.size != len(caps) + self.n_clients:
            raise StructuralError(
                f"metric has {self.metric.size} points, expected "
                f"{len(caps)} facilities + {self.n_clients} clients"
            )
        if self.k < 1:
            raise StructuralError("k must be a positive integer")

    @property
    def n_facilities(self) -> int:
        return len(self.capacities)

    @property
    def facilities(self) -> range:
        return range(self.n_facilities)

    @property
    def clients(self) -> range:
        return range(self.n_facilities, self.n_facilities + self.n_clients)

    def capacity(self, f: int) -> int:
        return self.capacities[f]

    @property
    def is_uniform(self) -> bool:
        return len(set(self.capacities)) <= 1

    def with_metric(self, metric: Metric) -> Instance:
        """Same facilities, clients and budget under another metric.

        Larger metrics (with appended points) are cut down to the base points.
        """
        n = self.n_facilities + self.n_clients
        if metric.size > n:
            metric = metric.restrict(range(n))
        return Instance(metric, self.capacities, self.n_clients, self.k)

    def with_k(self, k: int) -> Instance:
        return Instance(self.metric, self.capacities, self.n_clients, k)

    def capacity_shortfall(self, k: int | None = None) -> int:
        """How many clients the ``k`` largest capacities fail to cover (0 if enough)."""
        k = self.k if k is None else k
        best = sum(sorted(self.capacities, reverse=True)[:k])
        return max(0, self.n_clients - best)


@dataclass(frozen=True)
class Assignment:
    """Open facility set plus a client -> facility map."""

    open: frozenset[int]
    phi: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "open", frozenset(int(f) for f in self.open))
        object.__setattr__(self, "phi", {int(c): int(f) for c, f in self.phi.items()})

    def loads(self) -> dict[int, int]:
        out = {f: 0 for f in self.open}
        for f in self.phi.values():
            out[f] = out.get(f, 0) + 1
        return out

    def as_list(self, clients: Iterable[int]) -> list[int]:
        return [self.phi[c] for c in clients]

    def violations(self, inst: Instance, k: int | None = None) -> list[str]:
        """Feasibility problems of this assignment on ``inst``."""
        k = inst.k if k is None else k
        out = []
        if len(self.open) > k:
            out.append(f"{len(self.open)} facilities open, budget is {k}")
        for f in sorted(self.open):
            if f not in inst.facilities:
                out.append(f"open point {f} is not a facility")
        for c in inst.clients:
            if c not in self.phi:
                out.append(f"client {c} is unassigned")
            elif self.phi[c] not in self.open:
                out.append(f"client {c} assigned to closed facility {self.phi[c]}")
        for c in self.phi:
            if c not in inst.clients:
                out.append(f"assignment maps non-client point {c}")
        for f, load in sorted(self.loads().items()):
            if f in inst.facilities and load > inst.capacity(f):
                out.append(f"facility {f} serves {load} clients, capacity {inst.capacity(f)}")
        return out


def cost(phi: Assignment | Mapping[int, int], d: Metric) -> float:
    """Total connection cost of ``phi`` measured in ``d``."""
    mapping = phi.phi if isinstance(phi, Assignment) else phi
    n = d.size
    terms = []
    for c in sorted(mapping):
        f = mapping[c]
        if not (0 <= c < n and 0 <= f < n):
            raise StructuralError(f"pair ({c}, {f}) outside metric of size {n}")
        terms.append(d.dist[c, f])
    return math.fsum(terms)


def metric_from_weighted_graph(edges: Iterable[tuple[int, int, float]], size: int) -> Metric:
    """Shortest-path metric of an undirected weighted graph on ``size`` points."""
    edges = list(edges)
    if size <= 0:
        raise StructuralError("graph must have at least one point")
    best: dict[tuple[int, int], float] = {}
    for u, v, w in edges:
        u, v, w = int(u), int(v), float(w)
        if not (0 <= u < size and 0 <= v < size):
            raise StructuralError(f"edge ({u}, {v}) outside point range 0..{size - 1}")
        if w < 0 or not math.isfinite(w):
            raise StructuralError(f"edge ({u}, {v}) has invalid weight {w}")
        if u == v:
            continue
        key = (min(u, v), max(u, v))
        best[key] = min(w, best.get(key, math.inf))
    zero = [key for key, w in best.items() if w == 0]
    if zero:
        # sparse graphs cannot hold zero-weight edges; contract them instead
        best = _contract(best, _zero_components(zero, size))
    rows = [u for u, _ in best]
    cols = [v for _, v in best]
    graph = coo_matrix((list(best.values()), (rows, cols)), shape=(size, size)).tocsr()
    dist = shortest_path(graph, method="D", directed=False)
    if zero:
        dist = _expand_zero(dist, zero, size)
    bad = np.argwhere(~np.isfinite(dist))
    if len(bad):
        u, v = bad[0]
        raise StructuralError(f"graph is disconnected: no path between {u} and {v}")
    return Metric(dist)


def _zero_components(zero: list[tuple[int, int]], size: int) -> list[int]:
    root = list(range(size))

    def find(x):
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    for u, v in zero:
        ru, rv = find(u), find(v)
        if ru != rv:
            root[max(ru, rv)] = min(ru, rv)
    return [find(x) for x in range(size)]


def _contract(best: dict[tuple[int, int], float], rep: list[int]) -> dict[tuple[int, int], float]:
    # parallel edges between merged components keep their minimum weight
    out: dict[tuple[int, int], float] = {}
    for (u, v), w in best.items():
        ru, rv = rep[u], rep[v]
        if ru != rv:
            key = (min(ru, rv), max(ru, rv))
            out[key] = min(w, out.get(key, math.inf))
    return out


def _expand_zero(dist, zero, size):
    rep = np.array(_zero_components(zero, size))
    return dist[np.ix_(rep, rep)]


def validate_instance(inst: Instance, triangle: bool = False) -> list[str]:
    """All invariant violations of ``inst``; the empty list means valid.

    The O(n^3) triangle check runs only when ``triangle`` is set.
    """
    out = inst.metric.violations(triangle=triangle)
    if inst.k > inst.n_facilities:
        out.append(f"k={inst.k} exceeds the number of facilities ({inst.n_facilities})")
    short = inst.capacity_shortfall()
    if short:
        out.append(
            f"infeasible: the {inst.k} largest capacities serve "
            f"{inst.n_clients - short} of {inst.n_clients} clients"
        )
    return out


@dataclass
class Solution:
    """Solver output: an assignment, its cost in the solver's target metric, diagnostics."""

    assignment: Assignment
    cost: float
    stats: dict = field(default_factory=dict)
