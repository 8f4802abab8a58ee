"""Exhaustive ground-truth solvers for small instances."""
from __future__ import annotations

from itertools import combinations

from .errors import Infeasible, RefusedScale
from .instance import Instance, Solution
from .transport import assign_open
from .uncap import UncapSolution, nearest_assignment

MAX_FACILITIES = 12
MAX_K = 4


def _guard(inst: Instance, k: int, allow_large: bool):
    if allow_large:
        return
    if inst.n_facilities > MAX_FACILITIES or k > MAX_K:
        raise RefusedScale(
            f"exhaustive search limited to |F| <= {MAX_FACILITIES} and k <= {MAX_K} "
            f"(got |F|={inst.n_facilities}, k={k}); pass allow_large to override"
        )


def exact_ckm(inst: Instance, k: int | None = None, allow_large: bool = False) -> Solution:
    """Optimal capacitated solution: every facility subset of size <= k, one transport each."""
    k = inst.k if k is None else k
    _guard(inst, k, allow_large)
    k = min(k, inst.n_facilities)
    caps = inst.capacities
    best = None
    tried = 0
    for size in range(1, k + 1):
        for subset in combinations(inst.facilities, size):
            if sum(caps[f] for f in subset) < inst.n_clients:
                continue
            tried += 1
            phi, c = assign_open(inst, subset)
            if best is None or c < best[1]:
                best = (phi, c)
    if best is None:
        raise Infeasible("no subset of at most k facilities has enough capacity",
                         shortfall=inst.capacity_shortfall(k))
    return Solution(best[0], best[1], {"algorithm": "oracle", "subsets": tried})


def exact_uncap_kmedian(inst: Instance, k: int | None = None,
                        allow_large: bool = False) -> UncapSolution:
    """Optimal uncapacitated k-median (capacities ignored)."""
    k = inst.k if k is None else k
    _guard(inst, k, allow_large)
    k = min(k, inst.n_facilities)
    best = None
    for subset in combinations(inst.facilities, k):
        psi, c = nearest_assignment(inst, subset)
        if best is None or c < best[2]:
            best = (subset, psi, c)
    subset, psi, c = best
    return UncapSolution(tuple(subset), psi, k, c)
