"""Optimal capacitated assignment of clients to a fixed open facility set.

The assignment integer program is a transportation problem, so its LP
relaxation has an integral optimum; we solve it combinatorially as a unit
min-cost flow  source -> client -> facility -> sink  with successive shortest
augmenting paths (Dijkstra on reduced costs).
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import Infeasible, StructuralError
from .instance import TOL, Assignment, Instance, Metric


@dataclass(frozen=True)
class TransportProblem:
    open_facilities: tuple[tuple[int, int], ...]  # (point id, capacity)
    clients: tuple[int, ...]
    cost: np.ndarray  # shape (len(clients), len(open_facilities))

    def __post_init__(self):
        object.__setattr__(
            self, "open_facilities", tuple((int(f), int(u)) for f, u in self.open_facilities)
        )
        object.__setattr__(self, "clients", tuple(int(c) for c in self.clients))
        arr = np.array(self.cost, dtype=float).reshape(len(self.clients), len(self.open_facilities))
        arr.setflags(write=False)
        object.__setattr__(self, "cost", arr)

    @classmethod
    def from_metric(cls, metric: Metric, open_facilities, clients) -> TransportProblem:
        open_facilities = tuple(open_facilities)
        fac = [f for f, _ in open_facilities]
        return cls(open_facilities, tuple(clients), metric.dist[np.ix_(list(clients), fac)])

    @property
    def shortfall(self) -> int:
        return max(0, len(self.clients) - sum(u for _, u in self.open_facilities))


class _FlowNetwork:
    """Residual graph with successive-shortest-path min-cost flow."""

    def __init__(self, n: int):
        self.n = n
        self.adj: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[int] = []
        self.cost: list[float] = []

    def add_edge(self, u: int, v: int, cap: int, cost: float) -> int:
        eid = len(self.to)
        self.to += [v, u]
        self.cap += [cap, 0]
        self.cost += [cost, -cost]
        self.adj[u].append(eid)
        self.adj[v].append(eid + 1)
        return eid

    def min_cost_flow(self, s: int, t: int, want: int) -> int:
        """Push up to ``want`` units from s to t; returns the amount sent."""
        pot = [0.0] * self.n  # all arc costs are nonnegative initially
        sent = 0
        while sent < want:
            dist = [math.inf] * self.n
            prev = [-1] * self.n
            dist[s] = 0.0
            heap = [(0.0, s)]
            while heap:
                du, u = heapq.heappop(heap)
                if du > dist[u]:
                    continue
                for e in self.adj[u]:
                    if self.cap[e] <= 0:
                        continue
                    v = self.to[e]
                    # reduced costs are >= 0 up to rounding
                    nd = du + max(0.0, self.cost[e] + pot[u] - pot[v])
                    if nd < dist[v] - TOL:
                        dist[v] = nd
                        prev[v] = e
                        heapq.heappush(heap, (nd, v))
            if dist[t] == math.inf:
                break
            for v in range(self.n):
                if dist[v] < math.inf:
                    pot[v] += dist[v]
            push = want - sent
            v = t
            while v != s:
                e = prev[v]
                push = min(push, self.cap[e])
                v = self.to[e ^ 1]
            v = t
            while v != s:
                e = prev[v]
                self.cap[e] -= push
                self.cap[e ^ 1] += push
                v = self.to[e ^ 1]
            sent += push
        return sent


def optimal_mapping(p: TransportProblem) -> tuple[Assignment, float]:
    """Minimum-cost capacity-respecting assignment of every client.

    Raises Infeasible (with the shortfall) when the open capacity is too small.
    """
    m, q = len(p.clients), len(p.open_facilities)
    if p.shortfall:
        raise Infeasible(
            f"open capacity serves {m - p.shortfall} of {m} clients", shortfall=p.shortfall
        )
    opened = frozenset(f for f, _ in p.open_facilities)
    if m == 0:
        return Assignment(opened, {}), 0.0
    c = p.cost
    caps = [u for _, u in p.open_facilities]

    # Nearest assignment (lowest column on ties) is optimal whenever it fits.
    nearest = np.argmin(c, axis=1)
    if all(n <= caps[j] for j, n in enumerate(np.bincount(nearest, minlength=q))):
        choice = [int(j) for j in nearest]
    else:
        choice = _flow_assignment(c, caps)

    phi = {cl: p.open_facilities[j][0] for cl, j in zip(p.clients, choice)}
    total = math.fsum(c[i, j] for i, j in enumerate(choice))
    return Assignment(opened, phi), total


def _flow_assignment(c: np.ndarray, caps: Sequence[int]) -> list[int]:
    m, q = c.shape
    src, sink = m + q, m + q + 1
    net = _FlowNetwork(m + q + 2)
    for i in range(m):
        net.add_edge(src, i, 1, 0.0)
    arcs = []
    rows = c.tolist()
    for i in range(m):
        arcs.append([net.add_edge(i, m + j, 1, rows[i][j]) for j in range(q)])
    for j in range(q):
        net.add_edge(m + j, sink, min(caps[j], m), 0.0)
    if net.min_cost_flow(src, sink, m) != m:
        raise Infeasible("flow could not route every client")
    choice = []
    for i in range(m):
        used = [j for j in range(q) if net.cap[arcs[i][j]] == 0]
        if len(used) != 1:
            raise StructuralError(f"client row {i} carries non-unit flow")
        choice.append(used[0])
    return choice


def assign_open(inst: Instance, open_set, metric: Metric | None = None) -> tuple[Assignment, float]:
    """Optimal assignment of ``inst``'s clients to ``open_set`` measured in ``metric``.

    ``metric`` defaults to the instance's own and may be any metric over a
    superset of its points (e.g. a centered or rounded metric).
    """
    metric = inst.metric if metric is None else metric
    facs = sorted(int(f) for f in open_set)
    for f in facs:
        if f not in inst.facilities:
            raise StructuralError(f"point {f} is not a facility")
    p = TransportProblem.from_metric(metric, [(f, inst.capacity(f)) for f in facs], inst.clients)
    return optimal_mapping(p)
