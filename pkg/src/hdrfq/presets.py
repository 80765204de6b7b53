"""Built-in experiment scenarios.

Each preset builds one or more named :class:`Scenario` runs plus the name of
the analysis the command line applies to them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .hierarchy import HierarchySpec, parse_hierarchy, validate_and_normalize
from .schedulers import COLLAPSED, DOVETAILING, FLAT_DRFQ, HDRFQ_KINDS, NAIVE_COLLAPSED, NAIVE_MEMORYLESS
from .sim.scenario import FlowSource, ResourceSpec, Scenario

# Two-level example: f1 next to a group of two complementary flows.  f1's
# profile is only known to have dominant time 1 on r1; <1, 1> is assumed.
FIG3_PROFILES = {"f1": (1.0, 1.0), "f2.1": (1.0, 2.0), "f2.2": (2.0, 1.0)}
CUSTOM2 = (ResourceSpec("custom"), ResourceSpec("custom"))
CPU_LINK_200M = (ResourceSpec("cpu"), ResourceSpec("bandwidth", link_rate=200e6))
MODULES = ("basic-forwarding", "statistical-monitoring", "ipsec")


def fig3_hierarchy() -> HierarchySpec:
    return parse_hierarchy(
        {
            "id": "R",
            "children": [
                {"id": "f1", "weight": 0.5},
                {"id": "f2", "weight": 0.5, "children": [
                    {"id": "f2.1", "weight": 0.25},
                    {"id": "f2.2", "weight": 0.25},
                ]},
            ],
        }
    )


def _leaf(name: str, w: float) -> dict:
    return {"id": name, "weight": w}


def fig6_document() -> dict:
    """Four-level, 15-leaf tree: two L1 leaves, seven L2, three L3, three L4."""
    return {
        "id": "R",
        "children": [
            _leaf("f1", 0.1),
            _leaf("f2", 0.1),
            {"id": "f3", "weight": 0.5, "children": [
                {"id": "f3.1", "weight": 0.2, "children": [
                    {"id": "f3.1.1", "weight": 0.08, "children": [
                        _leaf("f3.1.1.1", 0.02),
                        _leaf("f3.1.1.2", 0.03),
                        _leaf("f3.1.1.3", 0.03),
                    ]},
                    _leaf("f3.1.2", 0.04),
                    _leaf("f3.1.3", 0.04),
                    _leaf("f3.1.4", 0.04),
                ]},
                _leaf("f3.2", 0.075),
                _leaf("f3.3", 0.075),
                _leaf("f3.4", 0.075),
                _leaf("f3.5", 0.075),
            ]},
            {"id": "f4", "weight": 0.3, "children": [
                _leaf("f4.1", 0.1),
                _leaf("f4.2", 0.1),
                _leaf("f4.3", 0.1),
            ]},
        ],
    }


def fig6_hierarchy() -> HierarchySpec:
    return validate_and_normalize(parse_hierarchy(fig6_document()), "strict")


def fig6_modules(seed: int) -> dict[str, str]:
    """Seeded module choice per leaf, shared by every scheduler of a run."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 6]))
    leaves = fig6_hierarchy().leaves
    picks = rng.integers(0, len(MODULES), size=len(leaves))
    return {leaf: MODULES[int(k)] for leaf, k in zip(leaves, picks)}


@dataclass
class PresetRun:
    label: str
    scenario: Scenario


@dataclass
class Preset:
    name: str
    analysis: str
    runs: list[PresetRun]
    params: dict = field(default_factory=dict)


def _kinds(scheduler: str | None, default) -> tuple[str, ...]:
    return (scheduler,) if scheduler else tuple(default)


def fig3_orders(seed=0, scheduler=None, horizon=None, window=None, packets=200) -> Preset:
    spec = fig3_hierarchy()
    runs = []
    for kind in _kinds(scheduler, HDRFQ_KINDS):
        flows = tuple(
            FlowSource(leaf, arrival="backlog", count=packets, profile=FIG3_PROFILES[leaf]) for leaf in spec.leaves
        )
        sc = Scenario(spec, flows, CUSTOM2, kind, horizon or 0.01, seed, window or 1e-4, name="fig3-orders")
        runs.append(PresetRun(kind, sc))
    return Preset("fig3-orders", "orders", runs, {"packets_per_leaf": packets})


def fig1_naive_violation(seed=0, scheduler=None, horizon=None, window=None, packets=700) -> Preset:
    spec = fig3_hierarchy()
    runs = []
    for kind in _kinds(scheduler, (NAIVE_COLLAPSED, NAIVE_MEMORYLESS) + HDRFQ_KINDS):
        flows = tuple(
            FlowSource(leaf, arrival="backlog", count=packets, profile=FIG3_PROFILES[leaf]) for leaf in spec.leaves
        )
        sc = Scenario(spec, flows, CUSTOM2, kind, horizon or 0.01, seed, window or 1e-3, name="fig1-naive-violation")
        runs.append(PresetRun(kind, sc))
    return Preset("fig1-naive-violation", "naive-violation", runs, {"packets_per_leaf": packets})


def fig5_dynamic(seed=0, scheduler=None, horizon=None, window=None, rate=25_000.0) -> Preset:
    """Staggered basic-forwarding, monitoring and IPsec flows on a 200 Mb/s
    link with 20% of the CPU."""
    spec = fig3_hierarchy()
    horizon = horizon or 20.0
    resources = (ResourceSpec("cpu", capacity_fraction=0.2), ResourceSpec("bandwidth", link_rate=200e6))

    def span(start, stop):
        return start, (None if stop >= horizon else stop)

    runs = []
    for kind in _kinds(scheduler, HDRFQ_KINDS):
        flows = []
        for leaf, module, (a, b) in (
            ("f1", "basic-forwarding", span(0.0, 17.0)),
            ("f2.1", "statistical-monitoring", span(5.0, horizon)),
            ("f2.2", "ipsec", span(10.0, horizon)),
        ):
            if a >= horizon:
                continue
            flows.append(FlowSource(leaf, a, b, "constant", rate, "fixed", 1300.0, module=module))
        sc = Scenario(spec, tuple(flows), resources, kind, horizon, seed, window or 0.5, name="fig5-dynamic")
        runs.append(PresetRun(kind, sc))
    return Preset("fig5-dynamic", "dynamic-shares", runs, {"rate_pps": rate, "packet_bytes": 1300})


def _fig6_flows(seed, rate, stagger, size="uniform", spec=None) -> tuple[FlowSource, ...]:
    spec = spec or fig6_hierarchy()
    modules = fig6_modules(seed)
    flows = []
    for k, leaf in enumerate(spec.leaves):
        flows.append(
            FlowSource(leaf, start=k * stagger, arrival="poisson", rate=rate, size=size, module=modules[leaf])
        )
    return tuple(flows)


def fig7_cdf(seed=0, scheduler=None, horizon=None, window=None, rate=100_000.0) -> Preset:
    spec = fig6_hierarchy()
    horizon = horizon or 2.0
    flows = _fig6_flows(seed, rate, 0.1)
    runs = [
        PresetRun(kind, Scenario(spec, flows, CPU_LINK_200M, kind, horizon, seed, window or 0.1, name="fig7-cdf"))
        for kind in _kinds(scheduler, HDRFQ_KINDS + (FLAT_DRFQ,))
    ]
    return Preset("fig7-cdf", "delay-cdf", runs, {"rate_pps": rate})


def fig10_levels(seed=0, scheduler=None, horizon=None, window=None, rate=100_000.0) -> Preset:
    p = fig7_cdf(seed, scheduler, horizon, window, rate)
    for r in p.runs:
        r.scenario = r.scenario.replace(name="fig10-levels")
    return Preset("fig10-levels", "delay-levels", p.runs, p.params)


FIG8_PROBES = {"L1": "f1", "L2": "f3.2", "L3": "f3.1.2", "L4": "f3.1.1.2"}
FIG8_FACTORS = (0.5, 1.0, 2.0, 4.0)


def reweighted(doc: dict, leaf: str, factor: float) -> HierarchySpec:
    """Copy of a hierarchy document with one leaf's weight scaled, internal
    weights re-derived and the root renormalized to 1."""
    import copy

    doc = copy.deepcopy(doc)

    def walk(node):
        if node.get("id") == leaf:
            node["weight"] = node["weight"] * factor
        for c in node.get("children", ()):
            walk(c)

    walk(doc)
    return validate_and_normalize(parse_hierarchy(doc), "renormalize")


def fig8_weight_sweep(seed=0, scheduler=None, horizon=None, window=None, rate=100_000.0, factors=FIG8_FACTORS) -> Preset:
    horizon = horizon or 1.0
    runs = []
    for level, leaf in FIG8_PROBES.items():
        for f in factors:
            spec = reweighted(fig6_document(), leaf, f)
            flows = _fig6_flows(seed, rate, 0.0, spec=spec)
            for kind in _kinds(scheduler, HDRFQ_KINDS):
                label = f"{level}-{leaf}-x{f:g}-{kind}"
                sc = Scenario(spec, flows, CPU_LINK_200M, kind, horizon, seed, window or 0.1, name="fig8-weight-sweep")
                runs.append(PresetRun(label, sc))
    return Preset("fig8-weight-sweep", "weight-sweep", runs, {"probes": FIG8_PROBES, "factors": list(factors)})


def containment_scenario(
    which: str,
    kind: str,
    seed: int = 0,
    dispatches: int = 100_000,
    light_every: int = 2,
    light_arrival: str = "constant",
) -> Scenario:
    """Saturating leaves mixed with light Poisson leaves that often go idle.

    Every ``light_every``-th leaf (in declaration order) sends at about a
    tenth of an equal split of the dispatch rate, starting at staggered
    offsets; the rest are permanently backlogged.  Packet profiles are
    constant per leaf.
    """
    if which == "fig3":
        spec = fig3_hierarchy()
        profiles = {k: tuple(v) for k, v in FIG3_PROFILES.items()}
        resources = CUSTOM2
    elif which == "fig6":
        spec = fig6_hierarchy()
        modules = fig6_modules(seed)
        from .sim.scenario import cost_profile

        profiles = {leaf: tuple(cost_profile(modules[leaf], 1300.0, CPU_LINK_200M)) for leaf in spec.leaves}
        resources = CPU_LINK_200M
    else:
        raise ValueError(f"unknown hierarchy {which!r}")
    mean_mu = float(np.mean([max(p) for p in profiles.values()]))
    horizon = dispatches * mean_mu * 1e-6 * 2.0
    flows = []
    for k, leaf in enumerate(spec.leaves):
        if k % light_every == light_every - 1:
            rate = 0.1 / (len(spec.leaves) * mean_mu * 1e-6)
            start = (k + 1) / (len(spec.leaves) + 1) / rate
            flows.append(FlowSource(leaf, start=start, arrival=light_arrival, rate=rate, profile=profiles[leaf]))
        else:
            flows.append(FlowSource(leaf, arrival="backlog", count=dispatches, profile=profiles[leaf]))
    return Scenario(
        spec, tuple(flows), resources, kind, horizon, seed, horizon / 10,
        max_packets=dispatches, name=f"containment-{which}",
    )


def saturated_scenario(which: str, kind: str, seed: int = 0, dispatches: int = 100_000) -> Scenario:
    """Every leaf permanently backlogged with a constant profile."""
    sc = containment_scenario(which, kind, seed, dispatches, light_every=10**9)
    return sc.replace(name=f"saturated-{which}")


PRESETS: dict[str, Callable[..., Preset]] = {
    "fig3-orders": fig3_orders,
    "fig1-naive-violation": fig1_naive_violation,
    "fig5-dynamic": fig5_dynamic,
    "fig7-cdf": fig7_cdf,
    "fig8-weight-sweep": fig8_weight_sweep,
    "fig10-levels": fig10_levels,
}
# the random property suite is driven by the ``check`` command
PRESET_NAMES = tuple(PRESETS) + ("random-property-suite",)


def build_preset(name: str, **kw) -> Preset:
    try:
        factory = PRESETS[name]
    except KeyError:
        if name == "random-property-suite":
            raise ValueError("random-property-suite is run by the 'check' command") from None
        raise ValueError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}") from None
    return factory(**{k: v for k, v in kw.items() if v is not None})
