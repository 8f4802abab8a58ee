import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ckm.errors import Infeasible
from ckm.instance import Instance, Metric, cost
from ckm.transport import TransportProblem, assign_open, optimal_mapping

from oracles import brute_transport


def problem(c, caps):
    c = np.asarray(c, float)
    return TransportProblem(tuple((j, u) for j, u in enumerate(caps)),
                            tuple(range(len(caps), len(caps) + c.shape[0])), c)


@st.composite
def transport_cases(draw, real=False):
    q = draw(st.integers(1, 6))
    m = draw(st.integers(1, 8))
    caps = draw(st.lists(st.integers(0, m), min_size=q, max_size=q))
    if sum(caps) < m:
        caps[0] += m - sum(caps)
    if real:
        vals = st.floats(0, 100, allow_nan=False)
    else:
        vals = st.integers(0, 100)
    c = draw(st.lists(st.lists(vals, min_size=q, max_size=q), min_size=m, max_size=m))
    return np.array(c, float), caps


def check_mapping(c, caps, phi):
    loads = {}
    for client, f in phi.phi.items():
        loads[f] = loads.get(f, 0) + 1
    assert len(phi.phi) == c.shape[0]
    assert all(loads[f] <= caps[f] for f in loads)


def test_single_facility_takes_everyone():
    phi, c = optimal_mapping(problem([[2], [3], [4]], [3]))
    assert set(phi.phi.values()) == {0} and c == 9


def test_capacity_forces_exchange():
    # f1 (cap 1): c1 at 1, c2 at 5; f2 (cap 2): c1 at 4, c2 at 2
    phi, c = optimal_mapping(problem([[1, 4], [5, 2]], [1, 2]))
    assert c == 3
    assert phi.phi == {2: 0, 3: 1}


def test_uncapacitated_limit_is_nearest_lowest_index():
    phi, c = optimal_mapping(problem([[3, 3, 5], [7, 2, 2], [1, 9, 1]], [3, 3, 3]))
    assert phi.phi == {3: 0, 4: 1, 5: 0}
    assert c == 6


def test_infeasible_carries_shortfall():
    with pytest.raises(Infeasible) as info:
        optimal_mapping(problem([[1, 1]] * 5, [1, 2]))
    assert info.value.shortfall == 2


@given(transport_cases())
def test_integer_costs_match_exhaustive(case):
    c, caps = case
    phi, value = optimal_mapping(problem(c, caps))
    check_mapping(c, caps, phi)
    assert value == brute_transport(c, caps)


@given(transport_cases(real=True))
def test_real_costs_match_exhaustive(case):
    c, caps = case
    _, value = optimal_mapping(problem(c, caps))
    assert value == pytest.approx(brute_transport(c, caps), abs=1e-6)


@given(transport_cases(), st.integers(0, 5))
def test_extra_capacity_never_hurts(case, j):
    c, caps = case
    j %= len(caps)
    _, before = optimal_mapping(problem(c, caps))
    more = list(caps)
    more[j] += 1
    _, after = optimal_mapping(problem(c, more))
    assert after <= before + 1e-9


def test_assign_open_cost_recomputes():
    d = np.array([[0, 9, 1, 2], [9, 0, 8, 7], [1, 8, 0, 1], [2, 7, 1, 0]], float)
    inst = Instance(Metric(d), (1, 2), 2, 2)
    phi, c = assign_open(inst, [0, 1])
    assert c == cost(phi, inst.metric) == 8
