"""Instance generators: random graph metrics, centered and tree instances,
and the Dominating Set -> k-median reduction."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ..centered import CenteredInstance, build_centered
from ..errors import StructuralError
from ..instance import Instance, Metric, metric_from_weighted_graph
from ..tree import TreeInstance
from ..uncap import UncapSolution, nearest_assignment

CAPACITY_RETRIES = 100


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_connected_edges(n: int, rng: np.random.Generator, extra_prob: float = 0.3,
                           weights: tuple[int, int] | None = (1, 20)) -> list[tuple[int, int, float]]:
    """Random spanning tree plus independent extra edges; integer weights, or 1 if ``weights`` is None."""
    order = rng.permutation(n)
    edges = []
    for i in range(1, n):
        j = int(rng.integers(0, i))
        edges.append((int(order[i]), int(order[j])))
    present = {tuple(sorted(e)) for e in edges}
    for u, v in combinations(range(n), 2):
        if (u, v) not in present and rng.random() < extra_prob:
            edges.append((u, v))
    if weights is None:
        return [(u, v, 1.0) for u, v in edges]
    lo, hi = weights
    return [(u, v, float(rng.integers(lo, hi + 1))) for u, v in edges]


def _capacities(rng, n_f: int, n_c: int, k: int, cap_range) -> tuple[int, ...]:
    lo, hi = int(cap_range[0]), int(cap_range[1])
    if lo < 0 or hi < lo:
        raise StructuralError(f"bad capacity range {cap_range}")
    if hi * min(k, n_f) < n_c:
        raise StructuralError(f"capacities up to {hi} can never serve {n_c} clients with k={k}")
    for _ in range(CAPACITY_RETRIES):
        caps = rng.integers(lo, hi + 1, size=n_f)
        if np.sort(caps)[::-1][:k].sum() >= n_c:
            return tuple(int(u) for u in caps)
    raise StructuralError(f"no feasible capacities drawn from {cap_range} in {CAPACITY_RETRIES} tries")


def gen_random_instance(n_f: int, n_c: int, k: int, cap_range=None, seed=0,
                        weight_range=(1, 20), extra_prob: float = 0.3) -> Instance:
    """Shortest-path metric of a random connected graph with integer weights.

    Capacities are uniform integers in ``cap_range`` (default ``[1, n_c]``),
    redrawn until the k largest can serve every client.
    """
    if n_f < 1 or n_c < 1 or k < 1:
        raise StructuralError("n_f, n_c and k must be positive")
    if k > n_f:
        raise StructuralError(f"k={k} exceeds n_f={n_f}")
    rng = _rng(seed)
    cap_range = (1, n_c) if cap_range is None else cap_range
    edges = random_connected_edges(n_f + n_c, rng, extra_prob, weight_range)
    metric = metric_from_weighted_graph(edges, n_f + n_c)
    caps = _capacities(rng, n_f, n_c, k, cap_range)
    return Instance(metric, caps, n_c, k)


def random_uncap_solution(inst: Instance, n_open: int, rng) -> UncapSolution:
    """Arbitrary open set (not optimised) with its nearest-facility map."""
    n_open = max(1, min(n_open, inst.n_facilities))
    opened = sorted(int(f) for f in rng.choice(inst.n_facilities, size=n_open, replace=False))
    psi, c = nearest_assignment(inst, opened)
    return UncapSolution(tuple(opened), psi, n_open, c)


def gen_centered_instance(n_f: int, n_c: int, k: int, ell: int, cap_range=None,
                          seed=0) -> CenteredInstance:
    """Random base instance turned centered around ``ell`` random facilities."""
    rng = _rng(seed)
    inst = gen_random_instance(n_f, n_c, k, cap_range, seed=rng)
    return build_centered(inst, random_uncap_solution(inst, ell, rng))


def gen_random_tree_instance(n_leaves: int, k: int, seed=0, length_range=(0, 10),
                             cap_range=None) -> TreeInstance:
    """Random binary tree; leaves split at random into facilities and clients (>= 1 each)."""
    if n_leaves < 2:
        raise StructuralError("need at least two leaves")
    rng = _rng(seed)
    n_f = int(rng.integers(max(1, k), n_leaves)) if n_leaves - 1 >= max(1, k) else 1
    n_f = max(1, min(n_f, n_leaves - 1))
    k = min(k, n_f)
    n_c = n_leaves - n_f
    # random merges of leaf nodes build a full binary tree
    parent = [-1] * n_leaves
    pool = list(range(n_leaves))
    while len(pool) > 1:
        a, b = sorted(rng.choice(len(pool), size=2, replace=False), reverse=True)
        u, v = pool.pop(a), pool.pop(b)
        parent.append(-1)
        parent[u] = parent[v] = len(parent) - 1
        pool.append(len(parent) - 1)
    lo, hi = length_range
    edge_len = [float(rng.integers(lo, hi + 1)) if p >= 0 else 0.0 for p in parent]
    leaves = rng.permutation(n_leaves)
    point_node = [int(x) for x in leaves]  # facilities first, then clients
    caps = _capacities(rng, n_f, n_c, k, cap_range or (1, n_c))
    placeholder = Metric(np.zeros((n_leaves, n_leaves)))
    tree = TreeInstance(Instance(placeholder, caps, n_c, k), parent, edge_len, point_node)
    return TreeInstance(tree.as_instance(), parent, edge_len, point_node)


# --- unweighted graph families and the Dominating Set reduction ---

def path_graph(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(n - 1)]


def cycle_graph(n: int) -> list[tuple[int, int]]:
    return path_graph(n) + ([(n - 1, 0)] if n > 2 else [])


def star_graph(leaves: int) -> list[tuple[int, int]]:
    return [(0, i) for i in range(1, leaves + 1)]


def random_graph(n: int, seed=0, extra_prob: float = 0.3) -> list[tuple[int, int]]:
    return [(u, v) for u, v, _ in random_connected_edges(n, _rng(seed), extra_prob, None)]


def graph_family(name: str, n: int, seed=0) -> tuple[list[tuple[int, int]], int]:
    """(edges, vertex count) for family ``path``, ``cycle``, ``star`` (n leaves) or ``random``."""
    if name == "path":
        return path_graph(n), n
    if name == "cycle":
        return cycle_graph(n), n
    if name == "star":
        return star_graph(n), n + 1
    if name == "random":
        return random_graph(n, seed), n
    raise StructuralError(f"unknown graph family {name!r}")


def has_dominating_set(edges, n: int, k: int) -> bool:
    """Exhaustive search for a dominating set of size <= k."""
    closed = [{v} for v in range(n)]
    for u, v in edges:
        closed[u].add(v)
        closed[v].add(u)
    everyone = set(range(n))
    for size in range(0, min(k, n) + 1):
        for subset in combinations(range(n), size):
            if set().union(*(closed[v] for v in subset)) == everyone:
                return True
    return False


@dataclass(frozen=True)
class Reduction:
    """k-median instance built from a graph; ``target`` = |V| - k."""

    instance: Instance
    target: int

    def predicts_dominating_set(self, uncap_optimum: float, tol: float = 1e-9) -> bool:
        """True iff the uncapacitated optimum equals |V| - k."""
        return abs(uncap_optimum - self.target) <= tol


def gen_dominating_set_reduction(edges, n: int, k: int) -> Reduction:
    """Every vertex is a facility (capacity |V|) and a client; unit-length graph metric."""
    if k < 1 or k > n:
        raise StructuralError(f"k must lie in 1..{n}")
    g = metric_from_weighted_graph([(u, v, 1.0) for u, v in edges], n).dist
    full = np.block([[g, g], [g, g]])
    inst = Instance(Metric(full), (n,) * n, n, k)
    return Reduction(inst, n - k)
