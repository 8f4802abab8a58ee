import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ckm.centered import build_centered
from ckm.errors import Infeasible
from ckm.harness.generators import gen_centered_instance, gen_random_instance, gen_random_tree_instance
from ckm.instance import Instance, Metric, cost
from ckm.tree import (
    TreeInstance,
    build_tree_instance,
    sample_frt,
    solve_logk,
    solve_tree_dp,
    tree_dp_table,
)
from ckm.uncap import UncapSolution, nearest_assignment

from oracles import brute_ckm, tree_metric


def make_tree(parent, edge_len, point_node, caps, n_clients, k):
    n = len(point_node)
    stub = Instance(Metric(np.zeros((n, n))), caps, n_clients, k)
    t = TreeInstance(stub, parent, edge_len, point_node)
    return TreeInstance(t.as_instance(), parent, edge_len, point_node)


def test_two_leaf_tree():
    # root 0; facility leaf 1 (edge 2.5), client leaf 2 (edge 4)
    t = make_tree([-1, 0, 0], [0, 2.5, 4.0], [1, 2], (1,), 1, 1)
    sol = solve_tree_dp(t)
    assert sol.cost == 6.5 and sol.stats["opened"] == 1


def test_facility_leaf_partial_flow():
    # one facility (capacity 3) and four clients hanging off the root
    t = make_tree([-1, 0, 0, 0, 0, 0], [0, 1, 1, 1, 1, 1], [1, 2, 3, 4, 5], (3,), 4, 1)
    t = t.binarized()
    table = tree_dp_table(t, 1)
    B = 4
    leaf = t.point_node[0]
    row = table[leaf][1]
    assert all(np.isfinite(row[B + b]) for b in range(0, 4))
    assert not np.isfinite(row[B + 4]) and not np.isfinite(row[B - 1])
    with pytest.raises(Infeasible):
        solve_tree_dp(t)


@given(st.integers(0, 10_000), st.integers(2, 12), st.integers(1, 3))
def test_dp_equals_oracle_on_tree_metric(seed, leaves, k):
    tree = gen_random_tree_instance(leaves, k, seed)
    inst = tree.base
    d = tree_metric(tree.parent, tree.edge_len, tree.point_node)
    np.testing.assert_allclose(inst.metric.dist, d)
    sol = solve_tree_dp(tree)
    assert sol.assignment.violations(inst) == []
    assert sol.cost == brute_ckm(d, inst.capacities, inst.n_clients, inst.k)


@given(st.integers(0, 10_000))
def test_dp_recurrence_spot_check(seed):
    tree = gen_random_tree_instance(8, 2, seed)
    K, B = min(2, tree.base.n_facilities), tree.base.n_clients
    table = tree_dp_table(tree, K)
    kids = tree.children()
    rng = np.random.default_rng(seed)
    internal = [v for v in range(tree.n_nodes) if len(kids[v]) == 2]
    for v in rng.choice(internal, size=min(3, len(internal)), replace=False):
        a, b = (table[c] for c in kids[v])
        w = tree.edge_len[v]
        for kk in range(K + 1):
            for bal in range(-B, B + 1):
                best = np.inf
                for k1, b1 in itertools.product(range(kk + 1), range(-B, B + 1)):
                    if -B <= bal - b1 <= B:
                        best = min(best, a[k1, b1 + B] + b[kk - k1, bal - b1 + B])
                expect = best + w * abs(bal)
                got = table[v][kk, bal + B]
                assert got == expect or (np.isinf(got) and np.isinf(expect))


def test_frt_single_center():
    emb = sample_frt(np.zeros((1, 1)), 0)
    assert emb.tree_dist().shape == (1, 1)


@given(st.integers(0, 10_000), st.floats(0.01, 1000))
def test_frt_two_centers_dominate(seed, delta):
    d = np.array([[0, delta], [delta, 0]])
    assert sample_frt(d, seed).tree_dist()[0, 1] >= delta - 1e-9


@given(st.integers(0, 10_000), st.integers(2, 8))
def test_frt_dominates_and_keeps_leaves(seed, n):
    d = gen_random_instance(n, 1, 1, None, seed).metric.dist[:n, :n]
    emb = sample_frt(d, seed)
    assert len(set(emb.leaf_of)) == n
    assert np.all(emb.tree_dist() >= d - 1e-9)


def test_frt_seed_reproducible():
    d = gen_random_instance(6, 1, 1, None, 4).metric.dist[:6, :6]
    np.testing.assert_array_equal(sample_frt(d, 7).tree_dist(), sample_frt(d, 7).tree_dist())


def test_tree_instance_same_center_zero_pendants():
    # facility 0 and client 1 share the spot of the only center
    inst = Instance(Metric(np.zeros((2, 2))), (1,), 1, 1)
    psi, c = nearest_assignment(inst, [0])
    cen = build_centered(inst, UncapSolution((0,), psi, 1, c))
    tree = build_tree_instance(cen, sample_frt(cen.center_dist, 0))
    assert tree.metric()(0, 1) == 0


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_tree_instance_distances(seed, ell):
    cen = gen_centered_instance(5, 5, 2, ell, None, seed)
    emb = sample_frt(cen.center_dist, seed)
    tree = build_tree_instance(cen, emb)
    assert tree.is_binary()
    dT = emb.tree_dist()
    m = tree.metric()
    for c in cen.base.clients:
        for f in cen.base.facilities:
            sc, sf = cen.center_slot[c], cen.center_slot[f]
            expect = cen.pendant[c] + dT[sc, sf] + cen.pendant[f]
            assert m(c, f) == pytest.approx(expect)
            assert m(c, f) >= cen.d_ell(c, f) - 1e-9


def test_logk_colocated_zero():
    pos = np.array([0, 40, 80, 0, 0, 40, 40], float)
    d = np.abs(pos[:, None] - pos[None, :])
    inst = Instance(Metric(d), (2, 2, 2), 4, 2)
    assert solve_logk(inst, samples=3).cost == 0


@given(st.integers(0, 10_000))
def test_logk_single_facility_slack(seed):
    inst = gen_random_instance(4, 5, 1, (5, 5), seed)
    opt = brute_ckm(inst.metric.dist, inst.capacities, 5, 1)
    assert solve_logk(inst, samples=4, seed=seed).cost == opt


@given(st.integers(0, 10_000), st.integers(1, 3))
def test_logk_feasible(seed, k):
    inst = gen_random_instance(5, 6, k, None, seed)
    sol = solve_logk(inst, samples=4, seed=seed)
    assert sol.assignment.violations(inst) == []
    assert sol.cost == pytest.approx(cost(sol.assignment, inst.metric))
    assert sol.cost >= brute_ckm(inst.metric.dist, inst.capacities, 6, k) - 1e-9
    assert sol.stats["cost_tree"] >= sol.stats["cost_centered"] - 1e-9 >= sol.cost - 2e-9
