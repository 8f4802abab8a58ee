"""Acceptance criteria, one test each, at the stated sizes, tolerances and time limits.

A summary line per criterion is printed at the end of the pytest run.
"""
import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from ckm.centered import build_buckets, build_centered, candidate_D_values, client_fact_violations, embedding_gap
from ckm.fpt import solve_ckm, solve_nonuniform_centered, solve_uniform_centered
from ckm.harness.generators import (
    gen_centered_instance,
    gen_dominating_set_reduction,
    gen_random_instance,
    gen_random_tree_instance,
    graph_family,
    has_dominating_set,
    random_uncap_solution,
)
from ckm.instance import Assignment, cost
from ckm.io import write_instance
from ckm.oracle import exact_ckm, exact_uncap_kmedian
from ckm.transport import TransportProblem, optimal_mapping
from ckm.tree import sample_frt, solve_tree_dp

from oracles import brute_transport, dominating_set_exists

TOL = 1e-9


def rngs(tag: int, count: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(tag).spawn(count)]


def centered_case(rng, uniform: bool):
    n_f = int(rng.integers(2, 7))
    n_c = int(rng.integers(1, 9))
    k = int(rng.integers(1, min(3, n_f) + 1))
    ell = int(rng.integers(1, 4))
    if uniform:
        u = int(rng.integers(math.ceil(n_c / k), n_c + 1))
        cap = (u, u)
    else:
        cap = (1, n_c)
    return gen_centered_instance(n_f, n_c, k, ell, cap, rng), k


def random_assignment(inst, rng, opened=None):
    if opened is None:
        opened = rng.choice(inst.n_facilities, size=int(rng.integers(1, inst.n_facilities + 1)),
                            replace=False).tolist()
    opened = sorted(int(f) for f in opened)
    return Assignment(frozenset(opened), {c: int(rng.choice(opened)) for c in inst.clients})


@pytest.mark.criterion(1, "transportation exactness")
def test_transport_exactness(record_property):
    t0 = time.perf_counter()
    n = 0
    for real, rng in [(False, r) for r in rngs(1, 500)] + [(True, r) for r in rngs(2, 500)]:
        q, m = int(rng.integers(1, 7)), int(rng.integers(1, 9))
        caps = rng.integers(0, m + 1, size=q)
        if caps.sum() < m:
            caps[0] += m - caps.sum()
        c = rng.uniform(0, 100, (m, q)) if real else rng.integers(0, 101, (m, q)).astype(float)
        p = TransportProblem(tuple((j, int(u)) for j, u in enumerate(caps)), tuple(range(q, q + m)), c)
        phi, value = optimal_mapping(p)
        expect = brute_transport(c, caps)
        if real:
            assert abs(value - expect) <= 1e-6
        else:
            assert value == expect
        assert all(phi.loads().get(j, 0) <= caps[j] for j in range(q))
        n += 1
    elapsed = time.perf_counter() - t0
    record_property("problems", n)
    record_property("seconds", round(elapsed, 2))
    assert elapsed < 10


@pytest.mark.criterion(2, "uniform centered solver equals the exact optimum")
def test_uniform_centered_exact(record_property):
    t0 = time.perf_counter()
    for rng in rngs(3, 200):
        cen, k = centered_case(rng, uniform=True)
        expect = exact_ckm(cen.as_instance(), k).cost
        assert solve_uniform_centered(cen, k).cost == expect
    elapsed = time.perf_counter() - t0
    record_property("instances", 200)
    record_property("seconds", round(elapsed, 2))
    assert elapsed < 30


@pytest.mark.criterion(3, "non-uniform centered solver within 1+eps")
def test_nonuniform_centered_ratio(record_property):
    eps = 0.5
    t0 = time.perf_counter()
    worst = 1.0
    for rng in rngs(4, 200):
        cen, k = centered_case(rng, uniform=False)
        opt = exact_ckm(cen.as_instance(), k).cost
        got = solve_nonuniform_centered(cen, k, eps).cost
        assert opt - TOL <= got <= (1 + eps) * opt + TOL
        if opt > 0:
            worst = max(worst, got / opt)
    elapsed = time.perf_counter() - t0
    record_property("max_ratio", round(worst, 4))
    record_property("seconds", round(elapsed, 2))
    assert elapsed < 60


@pytest.mark.criterion(4, "embedding inequalities and per-client facts")
def test_embedding_inequalities(record_property):
    t0 = time.perf_counter()
    for rng in rngs(5, 1000):
        n_f, n_c = int(rng.integers(1, 7)), int(rng.integers(1, 9))
        inst = gen_random_instance(n_f, n_c, 1, (n_c, n_c), rng)
        seed_sol = random_uncap_solution(inst, int(rng.integers(1, n_f + 1)), rng)
        cen = build_centered(inst, seed_sol)
        phi = random_assignment(inst, rng)
        lhs, mid, rhs = embedding_gap(phi, seed_sol.cost, inst, cen)
        assert lhs <= mid + TOL and mid <= rhs + TOL
        assert client_fact_violations(phi, cen) == []
    elapsed = time.perf_counter() - t0
    record_property("triples", 1000)
    record_property("seconds", round(elapsed, 2))
    assert elapsed < 10


@pytest.mark.criterion(5, "rounding sandwich")
def test_rounding_sandwich(record_property):
    checked = 0
    for rng in rngs(6, 300):
        cen, _ = centered_case(rng, uniform=False)
        eps = float(rng.choice([0.1, 0.25, 0.5, 1.0]))
        for D in candidate_D_values(cen):
            b = build_buckets(cen, D, eps)
            if not b.bucket_of:
                continue
            phi = random_assignment(cen.base, rng, opened=rng.permutation(sorted(b.bucket_of))[:3])
            low = cost(phi, cen.d_ell)
            mid = cost(phi, b.d_prime)
            assert low <= mid + TOL
            assert mid <= (1 + eps) * low + eps * D + TOL
            checked += 1
    record_property("assignments", checked)
    assert checked >= 1000


@pytest.mark.criterion(6, "end-to-end (7+eps) pipeline")
def test_end_to_end_ratio(record_property):
    eps = 0.5
    t0 = time.perf_counter()
    worst = 1.0
    for rng in rngs(7, 100):
        n_f, n_c = int(rng.integers(2, 6)), int(rng.integers(1, 7))
        k = int(rng.integers(1, 3))
        inst = gen_random_instance(n_f, n_c, k, None, rng)
        sol = solve_ckm(inst, k, eps)
        assert sol.assignment.violations(inst, k) == []
        assert sol.cost == pytest.approx(cost(sol.assignment, inst.metric), abs=TOL)
        opt = exact_ckm(inst, k).cost
        r = sol.cost / opt if opt > 0 else (1.0 if sol.cost <= TOL else math.inf)
        assert r <= 7 + eps + TOL
        worst = max(worst, r)
    elapsed = time.perf_counter() - t0
    print(f"\nend-to-end max ratio over 100 instances: {worst:.4f}")
    record_property("max_ratio", round(worst, 4))
    record_property("seconds", round(elapsed, 2))
    assert elapsed < 300


@pytest.mark.criterion(7, "tree DP exactness")
def test_tree_dp_exact(record_property):
    for i, rng in enumerate(rngs(8, 200)):
        tree = gen_random_tree_instance(int(rng.integers(2, 13)), int(rng.integers(1, 4)), rng)
        assert tree.is_binary()
        assert solve_tree_dp(tree).cost == exact_ckm(tree.as_instance()).cost
    record_property("trees", 200)


# Expected FRT stretch is at most c * log2(n) with c = 16 for this construction
# (level radii in [2^(i-1), 2^i), edge above a level-i cluster of length 2^(i+1)).
FRT_CONSTANT = 16


@pytest.mark.criterion(8, "FRT domination and mean distortion")
def test_frt_statistics(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    pts = rng.uniform(0, 100, size=(8, 2))
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    total = np.zeros_like(d)
    for child in np.random.SeedSequence(80).spawn(200):
        t = sample_frt(d, child).tree_dist()
        assert np.all(t >= d - TOL * np.maximum(1.0, d))  # hard: every sample dominates
        total += t
    off = ~np.eye(8, dtype=bool)
    stretch = float((total[off] / 200 / d[off]).max())
    elapsed = time.perf_counter() - t0
    record_property("max_mean_distortion", round(stretch, 3))
    record_property("bound", FRT_CONSTANT * 3)
    record_property("seconds", round(elapsed, 2))
    assert stretch <= FRT_CONSTANT * math.log2(8)
    assert elapsed < 10


def curated_graphs():
    for n in range(2, 8):
        yield f"path{n}", *graph_family("path", n)
    for n in range(3, 8):
        yield f"cycle{n}", *graph_family("cycle", n)
    for m in range(1, 7):
        yield f"star{m}", *graph_family("star", m)
    for seed in range(12):
        n = 3 + seed % 5
        yield f"random{seed}", *graph_family("random", n, seed)


@pytest.mark.criterion(9, "dominating-set reduction fidelity")
def test_reduction_fidelity(record_property):
    checked = agree_yes = 0
    for name, edges, n in curated_graphs():
        for k in (1, 2):
            if k > n:
                continue
            exists = has_dominating_set(edges, n, k)
            assert exists == dominating_set_exists(n, edges, k), name
            red = gen_dominating_set_reduction(edges, n, k)
            opt = exact_uncap_kmedian(red.instance, k).cost
            assert red.predicts_dominating_set(opt) == exists, (name, k, opt)
            checked += 1
            agree_yes += exists
    record_property("cases", checked)
    record_property("with_dominating_set", agree_yes)


def _solve_records(path, alg, threads):
    env = dict(os.environ)
    if threads is None:
        env.pop("CKM_THREADS", None)
    else:
        env["CKM_THREADS"] = threads
    out = subprocess.run([sys.executable, "-m", "ckm", "solve", str(path), "--algorithm", alg,
                          "--seed", "5", "--samples", "6", "--stats"],
                         capture_output=True, text=True, env=env, check=True).stdout
    lines = [json.loads(x) for x in out.strip().splitlines()]
    for rec in lines:
        for key in [k for k in rec if "wall_time" in k]:
            del rec[key]
    return lines


@pytest.mark.criterion(10, "determinism across reruns and thread counts")
def test_determinism(tmp_path, record_property):
    runs = 0
    for seed in (0, 1):
        path = tmp_path / f"inst{seed}.json"
        write_instance(gen_random_instance(6, 7, 2, None, seed), path)
        for alg in ("fpt", "tree", "oracle"):
            ref = _solve_records(path, alg, None)
            for threads in ("1", "2", "0", "1"):
                assert _solve_records(path, alg, threads) == ref, (seed, alg, threads)
                runs += 1
    record_property("compared_runs", runs)
