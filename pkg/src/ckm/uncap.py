"""Uncapacitated k-median subroutines that seed the centered reduction.

``bicriteria_greedy`` trades facility count for cost (at most
``ceil((1 + 1/eps) * k * (ln n + 1))`` facilities); ``local_search_kmedian``
opens exactly k facilities and is single-swap locally optimal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError
from .instance import Instance

IMPROVE = 1 - 1e-9


@dataclass(frozen=True)
class UncapSolution:
    open: tuple[int, ...]
    psi: dict[int, int]
    ell_budget: int
    cost: float = 0.0
    stats: dict = field(default_factory=dict, compare=False)


def nearest_assignment(inst: Instance, open_set) -> tuple[dict[int, int], float]:
    """Map every client to its closest open facility, lowest index on ties."""
    facs = np.array(sorted(open_set), dtype=int)
    if len(facs) == 0:
        raise StructuralError("no open facilities")
    clients = np.array(inst.clients, dtype=int)
    d = inst.metric.dist[np.ix_(clients, facs)]
    pick = np.argmin(d, axis=1)
    psi = {int(c): int(facs[j]) for c, j in zip(clients, pick)}
    return psi, math.fsum(d[np.arange(len(clients)), pick])


def ell_budget(k: int, epsilon: float, n_clients: int) -> int:
    n = max(n_clients, 1)
    return math.ceil((1 + 1 / epsilon) * k * (math.log(n) + 1))


def _greedy_cover(d: np.ndarray, open_cost: float) -> list[int]:
    """Greedy star cover: repeatedly take the (facility, nearest-prefix) star of
    least (opening cost + connection cost) per newly covered client."""
    n_f, n_c = d.shape
    uncovered = np.ones(n_c, dtype=bool)
    opened: list[int] = []
    is_open = np.zeros(n_f, dtype=bool)
    while uncovered.any():
        cols = np.flatnonzero(uncovered)
        sub = d[:, cols]
        order = np.argsort(sub, axis=1, kind="stable")
        prefix = np.cumsum(np.take_along_axis(sub, order, axis=1), axis=1)
        fee = np.where(is_open, 0.0, open_cost)[:, None]
        ratio = (fee + prefix) / np.arange(1, len(cols) + 1)[None, :]
        # argmin over the flattened (facility, prefix) grid gives the
        # (lowest facility index, shortest prefix) tie-break
        f, j = np.unravel_index(np.argmin(ratio), ratio.shape)
        uncovered[cols[order[f, : j + 1]]] = False
        if not is_open[f]:
            is_open[f] = True
            opened.append(int(f))
    return opened


def bicriteria_greedy(inst: Instance, k: int, epsilon: float) -> UncapSolution:
    """Low-cost uncapacitated solution with at most ``ell_budget(k, eps, n)`` facilities.

    The per-facility opening fee of the star cover is the smallest (found by
    bisection) that keeps the count within budget; leftover budget is spent on
    the facilities that lower the connection cost most.
    """
    if epsilon <= 0:
        raise StructuralError("epsilon must be positive")
    if inst.n_facilities == 0:
        raise StructuralError("instance has no facilities")
    budget = ell_budget(k, epsilon, inst.n_clients)
    cap = min(budget, inst.n_facilities)
    if inst.n_clients == 0:
        return UncapSolution((0,), {}, budget, 0.0)
    d = inst.metric.dist[np.ix_(list(inst.facilities), list(inst.clients))]

    opened = _greedy_cover(d, 0.0)
    rounds = 0
    if len(opened) > cap:
        lo, hi = 0.0, float(d.sum()) + 1.0
        opened = _greedy_cover(d, hi)
        # with a fee above the total distance a single star covers everyone
        for rounds in range(1, 61):
            mid = 0.5 * (lo + hi)
            trial = _greedy_cover(d, mid)
            if len(trial) <= cap:
                hi, opened = mid, trial
            else:
                lo = mid
            if hi - lo <= 1e-9 * max(1.0, hi):
                break

    opened = _fill_up(d, opened, cap)
    psi, total = nearest_assignment(inst, opened)
    return UncapSolution(
        tuple(sorted(opened)), psi, budget, total, {"fee_bisection_rounds": rounds}
    )


def _fill_up(d: np.ndarray, opened: list[int], cap: int) -> list[int]:
    opened = list(opened)
    best = d[opened].min(axis=0)
    while len(opened) < cap:
        gain = np.maximum(best[None, :] - d, 0.0).sum(axis=1)
        gain[opened] = -1.0
        f = int(np.argmax(gain))
        if gain[f] <= 0:
            break
        opened.append(f)
        best = np.minimum(best, d[f])
    return opened


def local_search_kmedian(inst: Instance, k: int, max_iters: int | None = None) -> UncapSolution:
    """Single-swap local search opening exactly ``min(k, |F|)`` facilities.

    Start: greedy additions. Each accepted swap lowers the cost by a factor of
    at least ``1 - 1e-9``; candidates are scanned first-improvement, open facility
    then closed facility, both in index order.
    """
    n_f = inst.n_facilities
    if n_f == 0:
        raise StructuralError("instance has no facilities")
    k = min(k, n_f)
    if max_iters is None:
        max_iters = 100 * k * n_f
    if inst.n_clients == 0:
        return UncapSolution(tuple(range(k)), {}, k, 0.0)
    d = inst.metric.dist[np.ix_(list(inst.facilities), list(inst.clients))]

    opened: list[int] = []
    best = np.full(d.shape[1], np.inf)
    for _ in range(k):
        totals = np.minimum(best[None, :], d).sum(axis=1)
        totals[opened] = np.inf
        f = int(np.argmin(totals))
        opened.append(f)
        best = np.minimum(best, d[f])

    opened.sort()
    current = float(best.sum())
    iters = 0
    improved = True
    while improved and iters < max_iters and current > 0:
        improved = False
        for out_pos in range(k):
            rest = [f for i, f in enumerate(opened) if i != out_pos]
            base = d[rest].min(axis=0) if rest else np.full(d.shape[1], np.inf)
            for f_in in range(n_f):
                if f_in in opened:
                    continue
                trial = float(np.minimum(base, d[f_in]).sum())
                if trial <= IMPROVE * current:
                    opened[out_pos] = f_in
                    opened.sort()
                    current = trial
                    improved = True
                    iters += 1
                    break
            if improved or iters >= max_iters:
                break

    psi, total = nearest_assignment(inst, opened)
    return UncapSolution(tuple(sorted(opened)), psi, k, total, {"swaps": iters})
