import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import node_lists, pools
from oracles import allocate_oracle, sigmoid_mp
from rfidsim.allocator import allocate, raw_allocation, sigmoid_share
from rfidsim.domain import ContractError, DomainError, NodeState, Pool, PowerMode, PriorityMix

VIP = PriorityMix(1, 0)
STD = PriorityMix(0, 1)
MHZ = 1e6


def test_sigmoid_at_threshold_is_half():
    assert sigmoid_share(4.0, 4.0, 1.0) == 0.5


@pytest.mark.parametrize("lth", [0.0, 1.0, 8.0, 123.456])
def test_sigmoid_three_quarters(lth):
    got = sigmoid_share(lth + math.log(3), lth, 1.0)
    assert abs(got - float(sigmoid_mp(lth + math.log(3), lth))) < 1e-15
    assert abs(got - 0.75) < 1e-12


def test_sigmoid_saturates_without_overflow():
    assert sigmoid_share(1e6, 0, 1) == 1.0
    assert 0.0 <= sigmoid_share(-1e6, 0, 1) < 1e-300


@pytest.mark.parametrize("args", [(math.nan, 0, 1), (0, math.inf, 1), (0, 0, 0), (0, 0, -1)])
def test_sigmoid_rejects(args):
    with pytest.raises(DomainError):
        sigmoid_share(*args)


@given(st.floats(-50, 50), st.floats(0, 50), st.floats(0.01, 5))
def test_sigmoid_matches_high_precision(lc, lth, k):
    assert math.isclose(sigmoid_share(lc, lth, k), float(sigmoid_mp(lc, lth, k)), rel_tol=1e-13, abs_tol=1e-300)


def test_raw_is_fraction_times_pool():
    pool = Pool(100 * MHZ, 8.0, 0.3)
    r = raw_allocation(NodeState("N0", 9.0), pool)
    assert r.raw_hz == r.sigmoid_fraction * pool.b_avail_hz
    with pytest.raises(ContractError):
        raw_allocation(NodeState("N0", 9.0, power_mode=PowerMode.SLEEP), pool)


def _lc_for_raw(frac, lth=0.0, k=1.0):
    # inverse sigmoid, so the examples can be stated in raw MHz
    return lth + math.log(frac / (1 - frac)) / k


def test_single_node_at_threshold():
    plan = allocate([NodeState("N0", 5.0)], Pool(100 * MHZ, 5.0))
    assert plan.get("N0").final_hz == 50 * MHZ
    assert plan.total_final_hz == 50 * MHZ


def test_two_identical_standard_nodes():
    lc = _lc_for_raw(0.75)
    nodes = [NodeState(f"N{i}", lc, usage_rate=1.0, priority_mix=STD) for i in range(2)]
    pool = Pool(100 * MHZ, 0.0)
    plan = allocate(nodes, pool)
    assert [e.final_hz for e in plan.entries] == pytest.approx([50 * MHZ] * 2, rel=1e-12)
    cells = allocate_oracle(nodes, pool.b_avail_hz, 0.0, 1.0)
    assert cells == {"N0": 50, "N1": 50} or all(abs(c - 50) <= 1 for c in cells.values())


def test_vip_first_then_standard():
    lc = _lc_for_raw(0.75)
    nodes = [NodeState("V", lc, priority_mix=VIP), NodeState("S", lc, priority_mix=STD)]
    plan = allocate(nodes, Pool(100 * MHZ, 0.0))
    assert plan.get("V").final_hz == pytest.approx(75 * MHZ, rel=1e-12)
    assert plan.get("S").final_hz == pytest.approx(25 * MHZ, rel=1e-12)
    cells = allocate_oracle(nodes, 100 * MHZ, 0.0, 1.0)
    assert abs(cells["V"] - 75) <= 1 and abs(cells["S"] - 25) <= 1


def test_vip_oversubscription_starves_standard():
    nodes = [NodeState(f"V{i}", 10.0, priority_mix=VIP) for i in range(3)] + [NodeState("S", 10.0)]
    plan = allocate(nodes, Pool(100 * MHZ, 0.0))
    assert plan.get("S").final_hz == 0.0
    assert plan.total_final_hz == pytest.approx(100 * MHZ, rel=1e-12)
    assert len({plan.get(f"V{i}").final_hz for i in range(3)}) == 1


def test_sleeping_node_gets_nothing():
    nodes = [NodeState("A", 9.0, power_mode=PowerMode.SLEEP), NodeState("B", 9.0)]
    plan = allocate(nodes, Pool(100 * MHZ, 8.0))
    assert plan.get("A") == ("A", 0.0, 0.0)
    assert plan.get("B").final_hz > 0


def test_zero_usage_splits_equally_and_caps():
    nodes = [NodeState("A", 0.0), NodeState("B", 10.0)]
    plan = allocate(nodes, Pool(100 * MHZ, 5.0, 1.0))
    raw_a = plan.get("A").raw_hz
    assert plan.get("A").final_hz == raw_a < 50 * MHZ
    assert plan.get("B").final_hz == pytest.approx(50 * MHZ)


@pytest.mark.parametrize("nodes", [[], [NodeState("A"), NodeState("A")]])
def test_allocate_rejects(nodes):
    with pytest.raises(DomainError):
        allocate(nodes, Pool(1.0, 0.0))


def test_entries_sorted():
    nodes = [NodeState("B", 3.0, usage_rate=1), NodeState("A", 3.0, usage_rate=1), NodeState("C", 9.0, priority_mix=VIP)]
    ids = [e.node_id for e in allocate(nodes, Pool(100 * MHZ, 5.0)).entries]
    assert ids == ["C", "A", "B"]


def oracle_instances(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(1, 6))
        b = float(rng.integers(1, 201)) * MHZ
        lth = float(rng.uniform(0, 10))
        k = float(rng.uniform(0.1, 2))
        nodes = [NodeState(
            f"N{i}", float(rng.uniform(0, 12)),
            usage_rate=float(rng.choice([0.0, float(rng.integers(1, 100))])),
            priority_mix=VIP if rng.random() < 0.35 else STD,
            power_mode=PowerMode.SLEEP if rng.random() < 0.1 else PowerMode.ACTIVE,
        ) for i in range(n)]
        yield nodes, Pool(b, lth, k)


def oracle_mismatches(nodes, pool):
    plan = allocate(nodes, pool)
    cells = allocate_oracle(nodes, pool.b_avail_hz, pool.l_threshold, pool.sensitivity_k)
    return [(e.node_id, e.final_hz / MHZ, cells[e.node_id]) for e in plan.entries
            if abs(math.floor(e.final_hz / MHZ) - cells[e.node_id]) > 1]


def test_matches_grid_oracle():
    for nodes, pool in oracle_instances(100, 7):
        assert oracle_mismatches(nodes, pool) == []


@settings(max_examples=300)
@given(node_lists(max_size=30), pools)
def test_conservation(nodes, pool):
    plan = allocate(nodes, pool)
    assert plan.total_final_hz <= pool.b_avail_hz * (1 + 1e-9)
    assert all(e.final_hz >= 0 for e in plan.entries)


@given(node_lists(max_size=8), pools, st.data())
def test_raw_monotone_in_load(nodes, pool, data):
    i = data.draw(st.integers(0, len(nodes) - 1))
    assume(nodes[i].active)
    bump = data.draw(st.floats(0, 5))
    before = allocate(nodes, pool).get(nodes[i].node_id).raw_hz
    nodes[i] = nodes[i]._replace(l_current=nodes[i].l_current + bump)
    assert allocate(nodes, pool).get(nodes[i].node_id).raw_hz >= before


@given(node_lists(max_size=8), pools, st.floats(0, 10), st.floats(0, 1e8))
def test_vip_dominance(others, pool, load, usage):
    others = [n._replace(node_id=f"O{i}") for i, n in enumerate(others)]
    vip = NodeState("V", load, usage_rate=usage, priority_mix=PriorityMix(1, 0))
    std = NodeState("S", load, usage_rate=usage, priority_mix=PriorityMix(0, 1))
    plan = allocate(others + [vip, std], pool)
    assert plan.get("V").final_hz >= plan.get("S").final_hz


@given(node_lists(max_size=10), pools)
def test_proportional_among_uncapped_standard(nodes, pool):
    plan = allocate(nodes, pool)
    std = [n for n in nodes if n.active and not n.is_vip and n.usage_rate > 0]
    free = [n for n in std if plan.get(n.node_id).final_hz < plan.get(n.node_id).raw_hz]
    for a, b in zip(free, free[1:]):
        fa, fb = plan.get(a.node_id).final_hz, plan.get(b.node_id).final_hz
        assert math.isclose(fa * b.usage_rate, fb * a.usage_rate, rel_tol=1e-9)


@given(node_lists(max_size=10), pools, st.integers(-20, 20))
def test_scale_covariance_exact_for_powers_of_two(nodes, pool, e):
    c = 2.0 ** e
    a = allocate(nodes, pool)
    b = allocate(nodes, Pool(pool.b_avail_hz * c, pool.l_threshold, pool.sensitivity_k))
    for ea, eb in zip(a.entries, b.entries):
        assert ea.node_id == eb.node_id
        assert eb.raw_hz == ea.raw_hz * c
        assert eb.final_hz == ea.final_hz * c


@given(node_lists(max_size=10), pools, st.floats(0.001, 1000))
def test_scale_covariance_any_factor(nodes, pool, c):
    a = allocate(nodes, pool).final()
    b = allocate(nodes, Pool(pool.b_avail_hz * c, pool.l_threshold, pool.sensitivity_k)).final()
    for nid in a:
        assert math.isclose(b[nid], a[nid] * c, rel_tol=1e-12, abs_tol=1e-9 * pool.b_avail_hz * c)
