import math

import numpy as np
import pytest
from hypothesis import strategies as st

from rfidsim.domain import NodeState, Pool, PowerMode, PriorityMix
from rfidsim.scenario import NodeSpec, Scenario

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_nodes(rng, n, sleep_p=0.1, vip_p=0.3):
    """``n`` random NodeStates drawn from a numpy generator."""
    nodes = []
    for i in range(n):
        asleep = rng.random() < sleep_p
        nodes.append(NodeState(
            f"N{i}",
            l_current=float(rng.uniform(0, 10)),
            demand_bits=float(rng.integers(0, 10**6)),
            usage_rate=float(rng.choice([0.0, rng.uniform(0, 1e8)])),
            priority_mix=PriorityMix(int(rng.random() < vip_p), int(rng.integers(0, 5))),
            power_mode=PowerMode.SLEEP if asleep else PowerMode.ACTIVE,
        ))
    return nodes


def random_pool(rng):
    return Pool(float(rng.uniform(1e6, 2e8)), float(rng.uniform(0, 10)), float(rng.uniform(0.05, 3)))


@st.composite
def node_lists(draw, min_size=1, max_size=12):
    n = draw(st.integers(min_size, max_size))
    nodes = []
    for i in range(n):
        nodes.append(NodeState(
            f"N{i}",
            l_current=draw(st.floats(0, 10)),
            demand_bits=draw(st.floats(0, 1e7)),
            usage_rate=draw(st.one_of(st.just(0.0), st.floats(0, 1e9))),
            priority_mix=PriorityMix(draw(st.integers(0, 2)), draw(st.integers(0, 5))),
            power_mode=draw(st.sampled_from([PowerMode.ACTIVE] * 4 + [PowerMode.SLEEP])),
        ))
    return nodes


pools = st.builds(
    Pool,
    b_avail_hz=st.floats(1e3, 1e9),
    l_threshold=st.floats(0, 10),
    sensitivity_k=st.floats(0.01, 5),
)


def small_scenario(n=4, rate=600.0, ticks=200, **kw):
    kw.setdefault("pool", Pool(100e6, 8.0, 0.3))
    nodes = tuple(NodeSpec(f"N{i}", rate, standard_tags=1) for i in range(n))
    return Scenario(nodes=nodes, duration_ticks=ticks, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def close(a, b, rel=1e-9, abs_=0.0):
    return math.isclose(a, b, rel_tol=rel, abs_tol=abs_)
