import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rfidsim.domain import DomainError, NodeState, Pool, PowerMode
from rfidsim.energy import PowerParams, SleepPolicy, accumulate_energy, node_power, update_sleep

POOL = Pool(100e6, 8.0)
POLICY = SleepPolicy(idle_ticks_to_sleep=10)


def test_power_model():
    p = PowerParams()
    assert node_power(NodeState("A", allocated_bw_hz=5e6), p) == 15.0
    assert node_power(NodeState("A", power_mode=PowerMode.SLEEP), p) == 2.0


@pytest.mark.parametrize("kw", [dict(p_sleep_w=10, p_base_w=10), dict(p_sleep_w=-1), dict(k_dyn_w_per_hz=-1)])
def test_power_params_checked(kw):
    with pytest.raises(DomainError):
        PowerParams(**kw)


def test_sleep_policy_checked():
    with pytest.raises(DomainError):
        SleepPolicy(idle_ticks_to_sleep=0)


def test_demand_wakes():
    node = NodeState("A", 0.0, demand_bits=1, power_mode=PowerMode.SLEEP)
    assert update_sleep(node, POLICY, POOL, 40) == (PowerMode.ACTIVE, 0)


def test_sleeps_after_exact_streak():
    node = NodeState("A", 0.0)
    streak, modes = 0, []
    for _ in range(10):
        mode, streak = update_sleep(node, POLICY, POOL, streak)
        modes.append(mode)
    assert modes == [PowerMode.ACTIVE] * 9 + [PowerMode.SLEEP]


def test_normal_load_resets_streak():
    assert update_sleep(NodeState("A", 4.0), POLICY, POOL, 3) == (PowerMode.ACTIVE, 0)


def test_energy_examples():
    assert accumulate_energy([], 0.1) == 0
    assert math.isclose(accumulate_energy([[10.0]] * 100, 0.1), 100.0, rel_tol=1e-15)
    with pytest.raises(DomainError):
        accumulate_energy([[1.0]], 0)


rows = st.lists(st.lists(st.floats(0, 1e4), min_size=1, max_size=5), max_size=30)


@given(rows, rows, st.floats(1e-4, 10))
def test_energy_additive(a, b, dt):
    whole = accumulate_energy(a + b, dt)
    assert whole >= 0
    assert math.isclose(whole, accumulate_energy(a, dt) + accumulate_energy(b, dt), rel_tol=1e-12, abs_tol=1e-12)
