"""Parameterized solvers on centered instances and the end-to-end pipeline.

On a centered instance every client reaches a facility of cluster F(s)
through the center s, so a solution is determined (up to exchange) by how
many facilities it opens per cluster (uniform capacities) or per
(cluster, distance bucket) pool (general capacities).  Enumerating these
count vectors and solving one transportation problem for each gives the
exact, respectively (1+eps)-approximate, optimum.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ._parallel import pmap
from .centered import CenteredInstance, build_buckets, build_centered, candidate_D_values
from .errors import Infeasible, InvariantViolation, StructuralError
from .instance import Instance, Solution, cost
from .transport import assign_open
from .uncap import bicriteria_greedy


@dataclass(frozen=True)
class Configuration:
    """Facility-open counts per pool key (center slot, or (slot, bucket))."""

    counts: dict

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def enumerate_configurations(pools: Sequence[int], k: int) -> Iterator[tuple[int, ...]]:
    """Every vector x with sum(x) == k and 0 <= x[i] <= pools[i], each once.

    Streamed in reverse lexicographic order, e.g. pools (2, 2) and k=2 give
    (2, 0), (1, 1), (0, 2).
    """
    pools = [int(p) for p in pools]
    if k < 0 or k > sum(pools):
        return
    if not pools:
        if k == 0:
            yield ()
        return
    room = [0] * (len(pools) + 1)
    for i in range(len(pools) - 1, -1, -1):
        room[i] = room[i + 1] + pools[i]

    def rec(i: int, left: int) -> Iterator[tuple[int, ...]]:
        if i == len(pools) - 1:
            yield (left,)
            return
        for x in range(min(pools[i], left), -1, -1):
            if left - x <= room[i + 1]:
                for rest in rec(i + 1, left - x):
                    yield (x,) + rest

    yield from rec(0, k)


def solve_uniform_centered(centered: CenteredInstance, k: int) -> Solution:
    """Exact optimum of a uniform-capacity centered instance (cost in d_ell).

    Inside each cluster the open facilities are the ones nearest the center
    (index breaks ties), so only the per-cluster counts are enumerated.
    """
    inst = centered.base
    if not inst.is_uniform:
        raise StructuralError("uniform solver needs equal capacities")
    k = min(k, inst.n_facilities)
    short = inst.capacity_shortfall(k)
    if short:
        raise Infeasible(f"{k} facilities cannot serve {inst.n_clients} clients", shortfall=short)
    clusters = [[] for _ in range(centered.ell)]
    for f in inst.facilities:
        clusters[centered.center_slot[f]].append(f)
    for fs in clusters:
        fs.sort(key=lambda f: (centered.pendant[f], f))

    best = None
    tried = 0
    for rank, counts in enumerate(enumerate_configurations([len(fs) for fs in clusters], k)):
        tried += 1
        opened = [f for fs, x in zip(clusters, counts) for f in fs[:x]]
        try:
            phi, c = assign_open(inst, opened, centered.d_ell)
        except Infeasible:
            continue
        if best is None or c < best[0]:
            best = (c, rank, phi, counts)
    if best is None:
        raise Infeasible("no configuration admits a feasible assignment")
    c, rank, phi, counts = best
    return Solution(phi, c, {
        "configurations": tried,
        "best_configuration": dict(enumerate(counts)),
        "ell": centered.ell,
    })


def _solve_for_D(args):
    centered, k, eps, D = args
    inst = centered.base
    B = build_buckets(centered, D, eps)
    survivors = sorted(B.bucket_of)
    k_eff = min(k, len(survivors))
    caps = sorted((inst.capacity(f) for f in survivors), reverse=True)
    if sum(caps[:k_eff]) < inst.n_clients:
        return None, 0
    pools = B.pools()
    keys = list(pools)
    # equal rounded distance inside a pool: prefer the largest capacities
    members = [sorted(pools[key], key=lambda f: (-inst.capacity(f), f)) for key in keys]
    best = None
    tried = 0
    for rank, counts in enumerate(enumerate_configurations([len(m) for m in members], k_eff)):
        tried += 1
        opened = [f for m, x in zip(members, counts) for f in m[:x]]
        if sum(inst.capacity(f) for f in opened) < inst.n_clients:
            continue
        phi, _ = assign_open(inst, opened, B.d_prime)
        c = cost(phi, centered.d_ell)
        if best is None or c < best[0]:
            best = (c, rank, phi, {keys[i]: x for i, x in enumerate(counts) if x})
    return best, tried


def solve_nonuniform_centered(centered: CenteredInstance, k: int, epsilon: float) -> Solution:
    """(1+eps)-approximate optimum of a centered instance (cost in d_ell).

    Guesses the largest client-facility distance D of an optimum, rounds the
    facility pendants into geometric buckets with eps/3, enumerates per-pool
    counts and keeps the assignment cheapest in d_ell.
    """
    if epsilon <= 0:
        raise StructuralError("epsilon must be positive")
    inst = centered.base
    k = min(k, inst.n_facilities)
    short = inst.capacity_shortfall(k)
    if short:
        raise Infeasible(f"{k} facilities cannot serve {inst.n_clients} clients", shortfall=short)
    eps = epsilon / 3
    Ds = candidate_D_values(centered)
    if inst.n_clients:
        sub = centered.d_ell.dist[np.ix_(list(inst.clients), list(inst.facilities))]
        # an optimum's largest distance is at least every client's nearest distance
        lower = float(sub.min(axis=1).max())
        Ds = [D for D in Ds if D >= lower]
    results = pmap(_solve_for_D, [(centered, k, eps, D) for D in Ds])

    best = None
    tried = 0
    for j, (res, n) in enumerate(results):
        tried += n
        if res is None:
            continue
        key = (res[0], j, res[1])
        if best is None or key < best[0]:
            best = (key, res)
    if best is None:
        raise Infeasible("no guess of D admits a feasible configuration")
    (c, j, _), (_, _, phi, counts) = best
    return Solution(phi, c, {
        "configurations": tried,
        "D_candidates": len(Ds),
        "D": Ds[j],
        "best_configuration": {f"{s}:{i}": x for (s, i), x in counts.items()},
        "ell": centered.ell,
    })


def split_epsilon(epsilon: float) -> float:
    """delta with (1 + delta) * (3 + 4 (1 + delta)) == 7 + epsilon."""
    return (-11 + math.sqrt(121 + 16 * epsilon)) / 8


def solve_ckm(inst: Instance, k: int | None = None, epsilon: float = 0.5,
              uniform: bool = False) -> Solution:
    """(7+eps)-approximation: bicriteria seed -> centered instance -> FPT solve -> pullback.

    ``uniform`` swaps in the exact uniform-capacity solver on the centered
    instance.  The returned cost is measured in the original metric.
    """
    if epsilon <= 0:
        raise StructuralError("epsilon must be positive")
    k = inst.k if k is None else k
    k = min(k, inst.n_facilities)
    short = inst.capacity_shortfall(k)
    if short:
        raise Infeasible(f"{k} facilities cannot serve {inst.n_clients} clients", shortfall=short)
    t0 = time.perf_counter()
    # uniform: exact inner solve, so the whole slack goes to the seed (3 + 4(1+d) = 7 + eps)
    delta = epsilon / 4 if uniform else split_epsilon(epsilon)
    seed = bicriteria_greedy(inst, k, delta)
    centered = build_centered(inst, seed)
    t1 = time.perf_counter()
    if uniform:
        inner = solve_uniform_centered(centered, k)
    else:
        inner = solve_nonuniform_centered(centered, k, delta)
    t2 = time.perf_counter()
    phi = inner.assignment
    bad = phi.violations(inst, k)
    if bad:
        raise InvariantViolation("; ".join(bad))
    c = cost(phi, inst.metric)
    if c > inner.cost + 1e-9 * max(1.0, inner.cost):
        raise InvariantViolation(f"pullback raised the cost: {c} > {inner.cost}")
    stats = {
        "algorithm": "fpt-uniform" if uniform else "fpt",
        "ell": centered.ell,
        "ell_budget": seed.ell_budget,
        "inner_epsilon": delta,
        "uncap_cost": seed.cost,
        "cost_centered": inner.cost,
        "cost": c,
        "wall_time_s": {"seed": t1 - t0, "inner": t2 - t1},
    }
    stats.update({key: v for key, v in inner.stats.items() if key != "ell"})
    return Solution(phi, c, stats)
