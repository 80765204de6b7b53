import json

import numpy as np
import pytest

from hdrfq.sim.scenario import (
    FlowSource,
    ResourceSpec,
    Scenario,
    ScenarioError,
    cost_profile,
    load_scenario,
    parse_scenario,
)
from hdrfq.sim.traffic import NS_PER_S, flow_rng, generate_arrivals

LINK = ResourceSpec("bandwidth", link_rate=200e6)


def test_cost_model_values():
    assert cost_profile("basic-forwarding", 1300, [ResourceSpec("cpu")]).demand == pytest.approx((9.918,))
    assert cost_profile("ipsec", 200, [ResourceSpec("cpu")]).demand == pytest.approx((87.5,))
    assert cost_profile("basic", 1300, [LINK]).demand == pytest.approx((52.0,))


def test_capacity_fraction_stretches_service():
    p = cost_profile("statistical-monitoring", 1300, [ResourceSpec("cpu", 0.2), LINK])
    assert p.demand == pytest.approx(((0.0008 * 1300 + 12.1) / 0.2, 52.0))


@pytest.mark.parametrize("kw", [
    {"name": "gpu"},
    {"name": "cpu", "capacity_fraction": 0.0},
    {"name": "cpu", "capacity_fraction": 1.5},
    {"name": "bandwidth"},
])
def test_bad_resources(kw):
    with pytest.raises(ScenarioError):
        ResourceSpec(**kw)


def test_custom_resource_needs_explicit_profile():
    with pytest.raises(ScenarioError):
        cost_profile("ipsec", 100, [ResourceSpec("custom")])
    with pytest.raises(ScenarioError):
        cost_profile("ipsec", 0, [ResourceSpec("cpu")])
    with pytest.raises(ScenarioError):
        cost_profile("firewall", 100, [ResourceSpec("cpu")])


def test_constant_arrivals_are_evenly_spaced():
    a = generate_arrivals(FlowSource("x", arrival="constant", rate=10, stop=1.0), seed=0)
    assert a.times_ns.tolist() == [k * NS_PER_S // 10 for k in range(10)]


def test_poisson_count_within_three_sigma():
    a = generate_arrivals(FlowSource("x", arrival="poisson", rate=100_000, stop=1.0), seed=1)
    assert abs(len(a) - 100_000) <= 3 * np.sqrt(100_000)
    assert np.all(np.diff(a.times_ns) >= 0)
    assert a.times_ns.max() < NS_PER_S


def test_fixed_and_uniform_sizes():
    a = generate_arrivals(FlowSource("x", arrival="constant", rate=100, stop=1.0, size_bytes=1300), seed=0)
    assert set(a.sizes.tolist()) == {1300.0}
    b = generate_arrivals(FlowSource("x", rate=1000, stop=1.0, size="uniform", size_lo=200, size_hi=1400), seed=0)
    assert b.sizes.min() >= 200 and b.sizes.max() <= 1400


def test_backlog_releases_everything_at_start():
    a = generate_arrivals(FlowSource("x", start=0.5, arrival="backlog", count=7), seed=0)
    assert a.times_ns.tolist() == [NS_PER_S // 2] * 7


def test_streams_are_independent_per_leaf():
    x = generate_arrivals(FlowSource("a", rate=500, stop=1.0), seed=3).times_ns
    y = generate_arrivals(FlowSource("a", rate=500, stop=1.0), seed=3).times_ns
    z = generate_arrivals(FlowSource("b", rate=500, stop=1.0), seed=3).times_ns
    assert np.array_equal(x, y)
    assert not np.array_equal(x[:10], z[:10])
    assert flow_rng(3, "a").random() == flow_rng(3, "a").random()


@pytest.mark.parametrize("kw", [
    {"arrival": "bursty"},
    {"size": "pareto"},
    {"start": -1.0},
    {"start": 2.0, "stop": 1.0},
    {"arrival": "backlog", "count": 0},
    {"rate": 0.0},
    {"module": "nat"},
])
def test_bad_flows(kw):
    with pytest.raises(ScenarioError):
        FlowSource("x", **kw)


DOC = {
    "hierarchy": {"id": "R", "children": [{"id": "a", "weight": 1}, {"id": "b", "weight": 3}]},
    "flows": [
        {"leaf": "a", "arrival": "constant", "rate": 1000, "module": "ipsec", "size": 500},
        {"leaf": "b", "arrival": "poisson", "rate": 2000, "size": {"kind": "uniform", "lo": 200, "hi": 1400}},
    ],
    "resources": [{"name": "cpu", "capacity_fraction": 0.5}, {"name": "bandwidth", "link_rate": 1e8}],
    "scheduler": "dovetailing-hdrfq",
    "horizon_s": 0.5,
    "seed": 9,
    "share_window_s": 0.05,
}


def test_parse_scenario_document(tmp_path):
    sc = parse_scenario(json.dumps(DOC))
    assert sc.hierarchy.nodes["b"].weight == 0.75
    assert sc.flows[1].size == "uniform"
    assert sc.m == 2
    path = tmp_path / "s.json"
    path.write_text(json.dumps(DOC))
    assert load_scenario(path).to_document() == sc.to_document()
    again = parse_scenario(sc.to_document())
    assert again.to_document() == sc.to_document()


def test_nominal_profile_uses_mean_size():
    sc = parse_scenario(DOC)
    prof = sc.nominal_profiles()
    assert prof["b"].demand == pytest.approx(((0.00286 * 800 + 6.2) / 0.5, 800 * 8 / 1e8 * 1e6))


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(flows=[]),
    lambda d: d.update(extra=1),
    lambda d: d.pop("hierarchy"),
    lambda d: d.update(scheduler="fifo"),
    lambda d: d.update(horizon_s=-1),
    lambda d: d["flows"].append({"leaf": "R", "rate": 1}),
    lambda d: d["flows"].append({"leaf": "zz", "rate": 1}),
    lambda d: d["hierarchy"]["children"][0].update(weight=0),
])
def test_invalid_scenarios(mutate):
    doc = json.loads(json.dumps(DOC))
    mutate(doc)
    with pytest.raises(ScenarioError):
        parse_scenario(doc)


def test_unreadable_file(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ScenarioError):
        load_scenario(bad)


def test_scenario_replace_revalidates():
    sc = parse_scenario(DOC)
    with pytest.raises(ScenarioError):
        sc.replace(scheduler="nope")
    assert sc.replace(seed=4).seed == 4
