from importlib import resources

import pytest

from rfidsim.domain import PriorityMix
from rfidsim.scenario import Scenario, ScenarioError, load_scenario, scenario_from_toml

MINIMAL = """
[pool]
b_avail_hz = 1e6
l_threshold = 2.0

[[node_group]]
count = 2
arrival_rate_pps = 5
"""


def builtin(name):
    return resources.files("rfidsim") / "scenarios" / f"{name}.toml"


def test_minimal_defaults():
    s = scenario_from_toml(MINIMAL)
    assert s.node_ids == ["N0", "N1"]
    assert s.duration_ticks == 1000 and s.pool.sensitivity_k == 1.0


def test_canonical_shape():
    with resources.as_file(builtin("canonical")) as p:
        s = load_scenario(p)
    assert len(s.nodes) == 20 and s.duration_ticks == 10_000 and s.seed == 42
    assert sum(n.priority_mix.vip > 0 for n in s.nodes) == 6
    # half the nodes offer more than an equal split carries per tick
    share_bits = s.pool.b_avail_hz / 20 * s.spectral_efficiency * s.tick_dt_s
    heavy = [n for n in s.nodes if n.arrival_rate_pps * s.tick_dt_s * s.packet_size_bits > share_bits]
    assert len(heavy) == 10


def test_quiescent_has_no_traffic():
    with resources.as_file(builtin("quiescent")) as p:
        s = load_scenario(p)
    assert all(n.arrival_rate_pps == 0 for n in s.nodes)


@pytest.mark.parametrize("patch,field", [
    ("[sim]\nduration_ticks = -5\n", "sim.duration_ticks"),
    ("[sim]\ntick_dt_s = 0\n", "sim.tick_dt_s"),
    ("[sim]\nbogus = 1\n", "sim.bogus"),
    ("[forecast]\nalpha = 2\n", "forecast.alpha"),
    ("[energy]\np_sleep_w = 20\n", "energy"),
])
def test_diagnostics_name_the_field(patch, field):
    with pytest.raises(ScenarioError) as ei:
        scenario_from_toml(patch + MINIMAL)
    assert any(p.startswith(field) for p in ei.value.problems)


def test_missing_pool_and_syntax():
    with pytest.raises(ScenarioError, match="pool.b_avail_hz"):
        scenario_from_toml("[[node_group]]\ncount = 1\n")
    with pytest.raises(ScenarioError, match="syntax"):
        scenario_from_toml("[pool\n")


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        load_scenario(tmp_path / "nope.toml")


def test_dict_round_trip_and_digest():
    s = scenario_from_toml(MINIMAL)
    again = Scenario.from_dict(s.to_dict())
    assert again == s and again.digest() == s.digest()
    assert s.nodes[0].priority_mix == PriorityMix(0, 0)
