from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from hdrfq.hierarchy import parse_hierarchy, validate_and_normalize
from hdrfq.presets import CPU_LINK_200M, FIG3_PROFILES, fig3_hierarchy, fig6_hierarchy, fig6_modules
from hdrfq.randtrees import random_instances
from hdrfq.schedulers import (
    COLLAPSED,
    DOVETAILING,
    FLAT_DRFQ,
    HDRFQ_KINDS,
    NAIVE_COLLAPSED,
    NAIVE_MEMORYLESS,
    SCHEDULER_KINDS,
    backlogged_order,
    collapsed_schedule,
    dovetail_schedule,
    flatten_weights,
    make_scheduler,
    naive_collapsed_schedule,
    naive_memoryless_schedule,
)
from hdrfq.sim.scenario import cost_profile

from oracles import ancestor_walk_flat_weight, exact_period_shares, fluid_dispatch_rates

FLAT = validate_and_normalize(parse_hierarchy({"children": [
    {"id": "a", "weight": 0.5}, {"id": "b", "weight": 0.3}, {"id": "c", "weight": 0.2}]}), "renormalize")


def fig6_profiles(seed=0):
    mods = fig6_modules(seed)
    spec = fig6_hierarchy()
    return {leaf: tuple(cost_profile(mods[leaf], 1300.0, CPU_LINK_200M)) for leaf in spec.leaves}


def test_flattened_weight_fig3():
    w = flatten_weights(fig3_hierarchy(), FIG3_PROFILES)
    assert Fraction(w["f2.1"]).limit_denominator(1000) == Fraction(1, 3)
    assert w["f2.1"] == pytest.approx(1 / 3, rel=1e-12)
    assert w["f1"] == 0.5


def test_flattened_weight_depth_one_is_identity():
    w = flatten_weights(FLAT, {"a": (1, 2), "b": (3, 1), "c": (1, 1)})
    assert w == {"a": 0.5, "b": 0.3, "c": 0.2}


def test_flattened_weight_fig6_matches_ancestor_walk():
    spec = fig6_hierarchy()
    prof = fig6_profiles()
    w = flatten_weights(spec, prof)
    for leaf in spec.leaves:
        assert w[leaf] == pytest.approx(ancestor_walk_flat_weight(spec, prof, leaf), rel=1e-12)


def test_collapsed_fig3_golden_period():
    order = backlogged_order(COLLAPSED, fig3_hierarchy(), FIG3_PROFILES, 23)
    assert order[:3] == ["f1", "f2.1", "f2.2"]
    assert order[3:23] == ["f1", "f1", "f1", "f2.1", "f2.2"] * 4


def test_dovetail_fig3_golden_period():
    order = backlogged_order(DOVETAILING, fig3_hierarchy(), FIG3_PROFILES, 20)
    assert order == ["f1", "f2.1", "f1", "f1", "f2.2"] * 4


def test_single_leaf_back_to_back():
    for kind in SCHEDULER_KINDS:
        assert backlogged_order(kind, FLAT, {"a": (1, 1), "b": (1, 1), "c": (1, 1)}, 4, leaves=["b"]) == ["b"] * 4


def test_degenerate_chain():
    spec = validate_and_normalize(parse_hierarchy({"children": [{"id": "m", "weight": 1, "children": [
        {"id": "x", "weight": 1}]}]}), "renormalize")
    out = dovetail_schedule(spec, {"x": [(1, 2)] * 5})
    assert [d.leaf for d in out] == ["x"] * 5


@pytest.mark.parametrize("schedule", [naive_collapsed_schedule, naive_memoryless_schedule])
def test_naive_baselines_give_four_to_one_to_one(schedule):
    queues = {leaf: [FIG3_PROFILES[leaf]] * 400 for leaf in FIG3_PROFILES}
    order = [d.leaf for d in schedule(fig3_hierarchy(), queues)][:360]
    period = order[-6:]
    assert Counter(period) == {"f1": 4, "f2.1": 1, "f2.2": 1}
    shares = exact_period_shares(period, FIG3_PROFILES, {"f2.1", "f2.2"}, 2)
    assert max(shares) == Fraction(3, 7)


def test_hdrfq_gives_f2_half_on_same_instance():
    queues = {leaf: [FIG3_PROFILES[leaf]] * 400 for leaf in FIG3_PROFILES}
    for schedule in (collapsed_schedule, dovetail_schedule):
        order = [d.leaf for d in schedule(fig3_hierarchy(), queues)][3:303]
        shares = exact_period_shares(order, FIG3_PROFILES, {"f2.1", "f2.2"}, 2)
        assert max(shares) == Fraction(1, 2)


def test_naive_collapsed_equals_collapsed_on_flat_tree():
    prof = {"a": (1, 2), "b": (3, 1), "c": (2, 2)}
    a = backlogged_order(NAIVE_COLLAPSED, FLAT, prof, 300)
    b = backlogged_order(COLLAPSED, FLAT, prof, 300)
    c = backlogged_order(FLAT_DRFQ, FLAT, prof, 300)
    assert a == b == c


def test_naive_memoryless_coincides_with_dovetail_when_symmetric():
    spec = validate_and_normalize(parse_hierarchy({"children": [
        {"id": "p", "weight": 1, "children": [{"id": "x", "weight": 1}, {"id": "y", "weight": 1}]},
        {"id": "q", "weight": 1, "children": [{"id": "z", "weight": 1}, {"id": "u", "weight": 1}]}]}), "renormalize")
    prof = {leaf: (1.0, 2.0) for leaf in spec.leaves}
    assert backlogged_order(NAIVE_MEMORYLESS, spec, prof, 200) == backlogged_order(DOVETAILING, spec, prof, 200)


def test_fig6_collapsed_frequencies_follow_fluid_rates():
    spec = fig6_hierarchy()
    prof = fig6_profiles()
    n = 60_000
    counts = Counter(backlogged_order(COLLAPSED, spec, prof, n))
    rates = fluid_dispatch_rates(spec, prof)
    for leaf in spec.leaves:
        assert abs(counts[leaf] - n * rates[leaf]) <= 2, leaf


def test_long_run_dominant_shares_agree_between_hdrfq_algorithms():
    for spec, prof in random_instances(seed=3, n=10):
        n = 4000
        mus = {leaf: max(p) for leaf, p in prof.items()}
        per = {}
        for kind in HDRFQ_KINDS:
            c = Counter(backlogged_order(kind, spec, prof, n))
            per[kind] = {leaf: c[leaf] for leaf in spec.leaves}
        for leaf in spec.leaves:
            # cumulative dominant service differs by a bounded number of packets
            gap = abs(per[COLLAPSED][leaf] - per[DOVETAILING][leaf]) * mus[leaf]
            assert gap <= 0.01 * n * np.mean(list(mus.values())) + 10 * mus[leaf]


def test_make_scheduler_rejects_unknown_kind():
    with pytest.raises(ValueError):
        make_scheduler("fifo", FLAT, {})


def test_events_append_packets_mid_run():
    # b joins at the group's floor, ties with a and loses on declaration order
    out = collapsed_schedule(FLAT, {"a": [(1, 1)] * 3}, events=[(2, "b", [(1, 1)] * 2)],
                             leaf_profiles={"a": (1, 1), "b": (1, 1), "c": (1, 1)})
    assert [d.leaf for d in out] == ["a", "a", "a", "b", "b"]
