"""Centered instances and their rounded, bucketed variants.

A centered metric is induced by a graph in which a set of centers forms a
clique (keeping the original distances) and every facility or client hangs
off its nearest center by a single pendant edge.  Centers are fresh points
appended after the base points, each a zero-distance copy of an open
facility of an uncapacitated solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation, StructuralError
from .instance import TOL, Assignment, Instance, Metric, cost
from .uncap import UncapSolution


def _closed_form(pendant: np.ndarray, owner: np.ndarray, center_d: np.ndarray) -> np.ndarray:
    """d(u,v) = pendant[u] + center_d[owner[u], owner[v]] + pendant[v], 0 on the diagonal.

    ``owner`` gives each point's center slot; centers themselves carry a zero pendant.
    """
    d = pendant[:, None] + center_d[np.ix_(owner, owner)] + pendant[None, :]
    np.fill_diagonal(d, 0.0)
    return d


@dataclass(frozen=True)
class CenteredInstance:
    base: Instance
    sources: tuple[int, ...]  # facility each center copies, one per center slot
    center_slot: tuple[int, ...]  # per base point, the slot of its center
    pendant: np.ndarray  # per base point, length of its edge to its center
    center_dist: np.ndarray  # slot x slot distances among the centers
    d_ell: Metric = field(repr=False)

    @property
    def n_base(self) -> int:
        return self.base.n_facilities + self.base.n_clients

    @property
    def ell(self) -> int:
        return len(self.sources)

    @property
    def centers(self) -> tuple[int, ...]:
        """Point ids of the centers (appended after the base points)."""
        return tuple(range(self.n_base, self.n_base + self.ell))

    def center_of(self, v: int) -> int:
        """Point id of the center that ``v`` hangs off."""
        if v >= self.n_base:
            return v
        return self.n_base + self.center_slot[v]

    @property
    def f_cluster(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {s: [] for s in self.centers}
        for f in self.base.facilities:
            out[self.center_of(f)].append(f)
        return {s: tuple(fs) for s, fs in out.items()}

    def as_instance(self) -> Instance:
        """The base instance measured in the centered metric."""
        return self.base.with_metric(self.d_ell)

    @classmethod
    def from_parts(cls, base, sources, center_slot, pendant, center_dist) -> CenteredInstance:
        pendant = np.asarray(pendant, dtype=float)
        center_dist = np.asarray(center_dist, dtype=float)
        ell = len(sources)
        owner = np.concatenate([np.asarray(center_slot, dtype=int), np.arange(ell)])
        full_pendant = np.concatenate([pendant, np.zeros(ell)])
        d_ell = Metric(_closed_form(full_pendant, owner, center_dist))
        pendant.setflags(write=False)
        center_dist.setflags(write=False)
        return cls(base, tuple(int(s) for s in sources), tuple(int(x) for x in center_slot),
                   pendant, center_dist, d_ell)


def build_centered(inst: Instance, uncap: UncapSolution) -> CenteredInstance:
    """Centered instance whose centers copy the open facilities of ``uncap``.

    Each base point is attached to its nearest open facility under the
    original metric (lowest index on ties).
    """
    sources = sorted(set(uncap.open))
    if not sources:
        raise StructuralError("uncapacitated solution opens no facilities")
    for f in sources:
        if f not in inst.facilities:
            raise StructuralError(f"open point {f} is not a facility")
    n = inst.n_facilities + inst.n_clients
    to_src = inst.metric.dist[:n][:, sources]
    slot = np.argmin(to_src, axis=1)
    pendant = to_src[np.arange(n), slot]
    center_dist = inst.metric.dist[np.ix_(sources, sources)]
    return CenteredInstance.from_parts(inst, sources, slot, pendant, center_dist)


def embedding_gap(phi: Assignment, psi_cost: float, inst: Instance,
                  centered: CenteredInstance) -> tuple[float, float, float]:
    """(cost in d, cost in d_ell, 3 cost in d + 4 psi_cost), checked to be ordered."""
    lhs = cost(phi, inst.metric)
    mid = cost(phi, centered.d_ell)
    rhs = 3 * lhs + 4 * psi_cost
    slack = TOL * max(1.0, abs(rhs))
    if not (lhs <= mid + slack and mid <= rhs + slack):
        raise InvariantViolation(f"embedding bound broken: {lhs} <= {mid} <= {rhs} fails")
    return lhs, mid, rhs


def client_fact_violations(phi: Assignment, centered: CenteredInstance) -> list[str]:
    """Check both per-client detour bounds behind the embedding gap.

    For client c served by f (centers s_c, s_f under the original metric d):
      d(f, s_f) <= d(f, c) + d(c, s_c)
      d(s_c, s_f) <= 2 (d(f, c) + d(c, s_c))
    """
    d = centered.base.metric.dist
    out = []
    for c, f in sorted(phi.phi.items()):
        sc, sf = centered.sources[centered.center_slot[c]], centered.sources[centered.center_slot[f]]
        a = d[f, c] + d[c, sc]
        if d[f, sf] > a + TOL * max(1.0, a):
            out.append(f"client {c}: d(f,s_f)={d[f, sf]} > {a}")
        if d[sc, sf] > 2 * a + TOL * max(1.0, a):
            out.append(f"client {c}: d(s_c,s_f)={d[sc, sf]} > {2 * a}")
        bound = 3 * d[f, c] + 4 * d[c, sc]
        if centered.d_ell.dist[c, f] > bound + TOL * max(1.0, bound):
            out.append(f"client {c}: d_ell(c,f)={centered.d_ell.dist[c, f]} > {bound}")
    return out


def bucket_count(n_clients: int, epsilon: float) -> int:
    """Index of the last bucket, ceil(log_{1+eps}(n/eps)), never negative."""
    n = max(n_clients, 1)
    return max(0, math.ceil(math.log(n / epsilon) / math.log1p(epsilon) - 1e-12))


@dataclass(frozen=True)
class BucketedInstance:
    centered: CenteredInstance
    D: float
    epsilon: float
    bucket_of: dict[int, int]  # surviving facility -> bucket index
    rounded: dict[int, float]  # surviving facility -> rounded pendant length
    removed: tuple[int, ...]
    last_bucket: int
    d_prime: Metric = field(repr=False)

    @property
    def n_buckets(self) -> int:
        return self.last_bucket + 1

    def pools(self) -> dict[tuple[int, int], list[int]]:
        """(center slot, bucket) -> surviving facilities, only nonempty pools."""
        out: dict[tuple[int, int], list[int]] = {}
        for f, i in sorted(self.bucket_of.items()):
            out.setdefault((self.centered.center_slot[f], i), []).append(f)
        return dict(sorted(out.items()))


def build_buckets(centered: CenteredInstance, D: float, epsilon: float) -> BucketedInstance:
    """Drop facilities farther than D from their center and round the rest.

    Bucket i < m holds pendant lengths in ((1+eps)^-(i+1) D, (1+eps)^-i D] and
    rounds them up to (1+eps)^-i D; bucket m = ceil(log_{1+eps}(n/eps)) holds
    [0, (1+eps)^-m D].  Only facility pendants change in d_prime.
    """
    if epsilon <= 0:
        raise StructuralError("epsilon must be positive")
    if not math.isfinite(D) or D < 0:
        raise StructuralError(f"guessed distance D must be a nonnegative real, got {D}")
    base = centered.base
    m = bucket_count(base.n_clients, epsilon)
    tops = [D * (1 + epsilon) ** -i for i in range(m + 1)]
    bucket_of, rounded, removed = {}, {}, []
    for f in base.facilities:
        x = centered.pendant[f]
        if x > D:
            removed.append(f)
            continue
        i = m
        for j in range(m):
            if x > tops[j + 1]:
                i = j
                break
        bucket_of[f] = i
        rounded[f] = tops[i]
    pend = np.array(centered.pendant, dtype=float)
    for f, r in rounded.items():
        pend[f] = r
    ell = centered.ell
    owner = np.concatenate([np.asarray(centered.center_slot, dtype=int), np.arange(ell)])
    d_prime = Metric(_closed_form(np.concatenate([pend, np.zeros(ell)]), owner, centered.center_dist))
    return BucketedInstance(centered, float(D), float(epsilon), bucket_of, rounded,
                            tuple(removed), m, d_prime)


def candidate_D_values(centered: CenteredInstance) -> list[float]:
    """Sorted distinct centered distances between a client and a facility."""
    base = centered.base
    sub = centered.d_ell.dist[np.ix_(list(base.clients), list(base.facilities))]
    return [float(x) for x in np.unique(sub)]
