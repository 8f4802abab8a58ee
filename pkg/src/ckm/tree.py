"""O(log k)-approximation through probabilistic tree embeddings.

The center clique of a centered instance is replaced by a random
hierarchically separated tree (random permutation + random radius
decomposition).  Capacitated k-median is solved exactly on the tree by a DP
over (subtree, facilities opened, flow crossing the subtree's top edge) and the
resulting assignment is reused in the original metric, which the tree dominates.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._parallel import pmap
from .centered import CenteredInstance, build_centered
from .errors import Infeasible, InvariantViolation, StructuralError
from .instance import TOL, Instance, Metric, Solution, cost
from .transport import assign_open
from .uncap import local_search_kmedian

INF = math.inf


@dataclass(frozen=True)
class TreeEmbedding:
    """Rooted tree over the centers; ``parent[root] == -1``."""

    parent: tuple[int, ...]
    edge_len: tuple[float, ...]  # length of the edge to the parent
    leaf_of: tuple[int, ...]  # center slot -> node
    seed: object = None
    scale: float = 1.0

    def depth(self) -> list[float]:
        out = [0.0] * len(self.parent)
        for v in _topological(self.parent):
            p = self.parent[v]
            if p >= 0:
                out[v] = out[p] + self.edge_len[v]
        return out

    def tree_dist(self) -> np.ndarray:
        """Tree distances between centers, slot x slot."""
        return _leaf_distances(self.parent, self.edge_len, self.leaf_of)


def _topological(parent) -> list[int]:
    children = [[] for _ in parent]
    roots = []
    for v, p in enumerate(parent):
        (children[p] if p >= 0 else roots).append(v)
    order, stack = [], list(roots)
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(children[v])
    return order


def _leaf_distances(parent, edge_len, nodes) -> np.ndarray:
    # path-to-root lists; distance sums the edges below the lowest common ancestor
    paths = []
    for v in nodes:
        chain = []
        while v >= 0:
            chain.append(v)
            v = parent[v]
        paths.append(chain)
    n = len(nodes)
    out = np.zeros((n, n))
    for a in range(n):
        anc_a = {v: i for i, v in enumerate(paths[a])}
        for b in range(a + 1, n):
            for j, v in enumerate(paths[b]):
                if v in anc_a:
                    i = anc_a[v]
                    break
            total = math.fsum(edge_len[u] for u in paths[a][:i]) + math.fsum(
                edge_len[u] for u in paths[b][:j])
            out[a, b] = out[b, a] = total
    return out


def sample_frt(center_dist, seed=None) -> TreeEmbedding:
    """One random dominating tree over the points of ``center_dist``.

    Distances are rescaled so the smallest nonzero one is 1; the level-i
    clusters are balls of radius beta * 2^(i-1) around the earliest point of a
    random permutation, and the edge above a level-i cluster has length
    2^(i+1) (rescaled back).  Zero-distance duplicates end up as siblings
    under zero-length edges.
    """
    d = np.asarray(center_dist, dtype=float)
    n = d.shape[0]
    if n == 0:
        raise StructuralError("need at least one center")
    if n == 1:
        return TreeEmbedding((-1,), (0.0,), (0,), seed, 1.0)
    positive = d[d > 0]
    if positive.size == 0:
        return TreeEmbedding((-1,) + (0,) * n, (0.0,) * (n + 1), tuple(range(1, n + 1)), seed, 1.0)
    rng = np.random.default_rng(seed)
    scale = float(positive.min())
    d = d / scale
    perm = rng.permutation(n)
    beta = rng.uniform(1.0, 2.0)
    top = max(1, math.ceil(math.log2(d.max() / beta)) + 1)

    parent, edge_len = [-1], [0.0]
    frontier = [(0, list(range(n)))]
    for level in range(top - 1, -1, -1):
        radius = beta * 2.0 ** (level - 1)
        nxt = []
        for node, members in frontier:
            groups: dict[int, list[int]] = {}
            for x in members:
                for p in perm:
                    if d[x, p] <= radius:
                        groups.setdefault(int(p), []).append(x)
                        break
            for p in sorted(groups, key=lambda q: int(np.flatnonzero(perm == q)[0])):
                parent.append(node)
                edge_len.append(2.0 ** (level + 1) * scale)
                nxt.append((len(parent) - 1, groups[p]))
        frontier = nxt
    leaf_of = [0] * n
    for node, members in frontier:
        if len(members) == 1:
            leaf_of[members[0]] = node
            continue
        for x in members:
            parent.append(node)
            edge_len.append(0.0)
            leaf_of[x] = len(parent) - 1
    parent, edge_len, leaf_of = _compress(parent, edge_len, leaf_of)
    return TreeEmbedding(tuple(parent), tuple(edge_len), tuple(leaf_of), seed, scale)


def _compress(parent, edge_len, keep):
    """Splice out internal nodes with a single child, summing edge lengths."""
    n = len(parent)
    children = [[] for _ in range(n)]
    for v, p in enumerate(parent):
        if p >= 0:
            children[p].append(v)
    parent, edge_len = list(parent), list(edge_len)
    alive = [True] * n
    keep_set = set(keep)
    for v in _topological(parent):
        if v in keep_set or len(children[v]) != 1:
            continue
        (c,) = children[v]
        if parent[v] < 0:
            parent[c] = -1
            edge_len[c] = 0.0
        else:
            parent[c] = parent[v]
            edge_len[c] += edge_len[v]
            sib = children[parent[v]]
            sib[sib.index(v)] = c
        alive[v] = False
    new_id = {}
    for v in range(n):
        if alive[v]:
            new_id[v] = len(new_id)
    p2 = [new_id[parent[v]] if parent[v] >= 0 else -1 for v in range(n) if alive[v]]
    e2 = [edge_len[v] for v in range(n) if alive[v]]
    return p2, e2, [new_id[v] for v in keep]


@dataclass
class TreeInstance:
    """Capacitated k-median on a rooted tree with clients/facilities at leaves.

    ``point_node[p]`` is the leaf holding base point ``p`` of ``base``.
    """

    base: Instance
    parent: list[int]
    edge_len: list[float]
    point_node: list[int]
    _metric: Metric | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    def children(self) -> list[list[int]]:
        out = [[] for _ in self.parent]
        for v, p in enumerate(self.parent):
            if p >= 0:
                out[p].append(v)
        return out

    @property
    def root(self) -> int:
        return self.parent.index(-1)

    def metric(self) -> Metric:
        """Tree distances between base points."""
        if self._metric is None:
            self._metric = Metric(_leaf_distances(self.parent, self.edge_len, self.point_node))
        return self._metric

    def as_instance(self) -> Instance:
        return self.base.with_metric(self.metric())

    def is_binary(self) -> bool:
        return all(len(c) <= 2 for c in self.children())

    def binarized(self) -> TreeInstance:
        """Same tree metric, every node with at most two children (zero-length dummies)."""
        parent, edge_len = list(self.parent), list(self.edge_len)
        kids = self.children()
        for v in range(len(kids)):
            extra = kids[v][1:]
            anchor = v
            while len(extra) > 1:
                parent.append(anchor)
                edge_len.append(0.0)
                dummy = len(parent) - 1
                parent[extra[0]] = dummy
                anchor = dummy
                extra = extra[1:]
            if extra:
                parent[extra[0]] = anchor
        return TreeInstance(self.base, parent, edge_len, list(self.point_node))


def build_tree_instance(centered: CenteredInstance, emb: TreeEmbedding) -> TreeInstance:
    """Replace the center clique by ``emb``; every base point hangs off its center's leaf."""
    if len(emb.leaf_of) != centered.ell:
        raise StructuralError("embedding does not match the instance's centers")
    parent, edge_len = list(emb.parent), list(emb.edge_len)
    point_node = []
    for v in range(centered.n_base):
        parent.append(emb.leaf_of[centered.center_slot[v]])
        edge_len.append(float(centered.pendant[v]))
        point_node.append(len(parent) - 1)
    return TreeInstance(centered.base, parent, edge_len, point_node).binarized()


def _min_plus(a: np.ndarray, b: np.ndarray, B: int) -> np.ndarray:
    """c[t] = min_{i+j=t} a[i] + b[j] on the balance axis, clipped to [-B, B]."""
    width = 2 * B + 1
    out = np.full(2 * width - 1, INF)
    for i in np.flatnonzero(np.isfinite(a)):
        np.minimum(out[i:i + width], a[i] + b, out=out[i:i + width])
    return out[B:B + width]


class _TreeDP:
    def __init__(self, tree: TreeInstance, k: int):
        if not tree.is_binary():
            raise StructuralError("tree DP needs a binary tree")
        self.tree = tree
        inst = tree.base
        self.k = k
        self.B = inst.n_clients
        self.kids = tree.children()
        self.payload: dict[int, tuple[str, int]] = {}
        for p, node in enumerate(tree.point_node):
            if tree.parent[node] >= 0 and self.kids[node]:
                raise StructuralError(f"point {p} sits on an internal node")
            self.payload[node] = ("facility" if p in inst.facilities else "client", p)
        self.table: dict[int, np.ndarray] = {}
        self.inner: dict[int, np.ndarray] = {}

    def run(self) -> dict[int, np.ndarray]:
        K, B = self.k, self.B
        width = 2 * B + 1
        inst = self.tree.base
        for v in reversed(_topological(self.tree.parent)):
            t = np.full((K + 1, width), INF)
            kind = self.payload.get(v)
            if kind is None and not self.kids[v]:
                t[0, B] = 0.0
            elif kind and kind[0] == "client":
                if B >= 1:
                    t[0, B - 1] = 0.0
            elif kind:
                u = min(inst.capacity(kind[1]), B)
                t[0, B] = 0.0
                if K >= 1:
                    t[1, B:B + u + 1] = 0.0
            else:
                kids = self.kids[v]
                t = self.table[kids[0]].copy()
                if len(kids) == 2:
                    t = self._merge(t, self.table[kids[1]])
            self.inner[v] = t
            w = self.tree.edge_len[v]
            self.table[v] = t + w * np.abs(np.arange(-B, B + 1))[None, :]
        return self.table

    def _merge(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        K, B = self.k, self.B
        out = np.full_like(a, INF)
        for k1 in range(K + 1):
            if not np.isfinite(a[k1]).any():
                continue
            for k2 in range(K + 1 - k1):
                if np.isfinite(b[k2]).any():
                    np.minimum(out[k1 + k2], _min_plus(a[k1], b[k2], B), out=out[k1 + k2])
        return out

    def recover(self, v: int, kk: int, b: int, opened: list[int]):
        """Collect the facilities opened by an optimal realisation of D(v, kk, b)."""
        B = self.B
        kind = self.payload.get(v)
        if kind is not None:
            if kind[0] == "facility" and kk == 1:
                opened.append(kind[1])
            return
        kids = self.kids[v]
        if not kids:
            return
        if len(kids) == 1:
            self.recover(kids[0], kk, b, opened)
            return
        target = self.inner[v][kk, b + B]
        ta, tb = self.table[kids[0]], self.table[kids[1]]
        best = None
        for k1 in range(kk + 1):
            for b1 in range(-B, B + 1):
                b2 = b - b1
                if -B <= b2 <= B:
                    val = ta[k1, b1 + B] + tb[kk - k1, b2 + B]
                    if best is None or val < best[0]:
                        best = (val, k1, b1)
        val, k1, b1 = best
        if not math.isclose(val, target, rel_tol=1e-9, abs_tol=1e-9):
            raise InvariantViolation(f"DP backtrack mismatch at node {v}: {val} != {target}")
        self.recover(kids[0], k1, b1, opened)
        self.recover(kids[1], kk - k1, b - b1, opened)


def tree_dp_table(tree: TreeInstance, k: int) -> dict[int, np.ndarray]:
    """Full D(t, k', b) tables, indexed [k', b + n_clients], edge cost included."""
    return _TreeDP(tree, k).run()


def solve_tree_dp(tree: TreeInstance, k: int | None = None) -> Solution:
    """Exact capacitated k-median on a binary tree with points at the leaves.

    Returns the optimum assignment under the tree metric; the open set comes
    from backtracking the DP, the client map from one transportation solve.
    """
    inst = tree.base
    k = inst.k if k is None else k
    k = min(k, inst.n_facilities)
    dp = _TreeDP(tree, k)
    table = dp.run()
    root = tree.root
    B = dp.B
    col = table[root][:, B]
    ks = range(1, k + 1)
    best_k = min(ks, key=lambda x: (col[x], x))
    if not math.isfinite(col[best_k]):
        short = inst.capacity_shortfall(k)
        raise Infeasible("no finite DP entry at the root", shortfall=short)
    opened: list[int] = []
    dp.recover(root, best_k, 0, opened)
    phi, c = assign_open(inst, opened, tree.metric())
    if not math.isclose(c, col[best_k], rel_tol=1e-9, abs_tol=1e-9):
        raise InvariantViolation(f"transport cost {c} differs from DP optimum {col[best_k]}")
    return Solution(phi, c, {"dp_cost": float(col[best_k]), "opened": best_k})


def solve_tree_centered(centered: CenteredInstance, k: int, samples: int = 8,
                        seed: int = 0) -> Solution:
    """Best of ``samples`` tree solves on a centered instance, costed in its base metric."""
    inst = centered.base
    if samples < 1:
        raise StructuralError("need at least one tree sample")
    children = np.random.SeedSequence(seed).spawn(samples)

    def one(i):
        emb = sample_frt(centered.center_dist, children[i])
        tree = build_tree_instance(centered, emb)
        sol = solve_tree_dp(tree, k)
        phi = sol.assignment
        c_d = cost(phi, inst.metric)
        c_ell = cost(phi, centered.d_ell)
        slack = TOL * max(1.0, sol.cost)
        if not (c_d <= c_ell + slack and c_ell <= sol.cost + slack):
            raise InvariantViolation(f"domination chain broken: {sol.cost} >= {c_ell} >= {c_d}")
        return c_d, i, sol, c_ell

    results = pmap(one, range(samples))
    c_d, i, sol, c_ell = min(results, key=lambda r: (r[0], r[1]))
    return Solution(sol.assignment, c_d, {
        "ell": centered.ell,
        "samples": samples,
        "best_sample": i,
        "cost_tree": sol.cost,
        "cost_centered": c_ell,
        "sample_costs": [r[0] for r in results],
    })


def solve_logk(inst: Instance, k: int | None = None, samples: int = 8, seed: int = 0) -> Solution:
    """O(log k)-approximation: local-search seed -> k-centered instance -> best tree solve."""
    k = inst.k if k is None else k
    k = min(k, inst.n_facilities)
    short = inst.capacity_shortfall(k)
    if short:
        raise Infeasible(f"{k} facilities cannot serve {inst.n_clients} clients", shortfall=short)
    t0 = time.perf_counter()
    seedling = local_search_kmedian(inst, k)
    centered = build_centered(inst, seedling)
    sol = solve_tree_centered(centered, k, samples, seed)
    bad = sol.assignment.violations(inst, k)
    if bad:
        raise InvariantViolation("; ".join(bad))
    stats = {"algorithm": "tree", "uncap_cost": seedling.cost, "cost": sol.cost}
    stats.update(sol.stats)
    stats["wall_time_s"] = time.perf_counter() - t0
    return Solution(sol.assignment, sol.cost, stats)
