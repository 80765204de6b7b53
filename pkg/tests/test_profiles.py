import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdrfq.presets import FIG3_PROFILES, fig3_hierarchy
from hdrfq.profiles import (
    PacketProfile,
    ProfileError,
    dominant,
    effective_weights,
    normalize,
    virtual_profile,
    virtual_profiles_bottom_up,
)
from hdrfq.randtrees import random_instances

from oracles import symbolic_virtual_profiles

positive = st.floats(0.01, 100, allow_nan=False)


@pytest.mark.parametrize("p, r, mu", [((2, 1), 0, 2), ((3, 3), 0, 3), ((1, 2), 1, 2), ((0, 0, 5), 2, 5)])
def test_dominant(p, r, mu):
    d = dominant(p)
    assert (d.resource, d.mu) == (r, mu)


@pytest.mark.parametrize("p, want", [((4, 2), (1, 0.5)), ((1, 2), (0.5, 1)), ((5,), (1,))])
def test_normalize(p, want):
    assert normalize(p).values == pytest.approx(want)


@pytest.mark.parametrize("bad", [(), (0, 0), (-1, 2), (float("nan"), 1), (float("inf"),)])
def test_invalid_profiles(bad):
    with pytest.raises(ProfileError):
        PacketProfile(tuple(bad))


def test_virtual_profile_from_normalized_children():
    vp = virtual_profile([(normalize((1, 0.5)), 0.4), (normalize((0.5, 1)), 0.2)])
    assert vp.demand == pytest.approx((0.5, 0.4))


def test_virtual_profile_of_fig3_group():
    vp = virtual_profile([((1, 2), 0.25), ((2, 1), 0.25)])
    assert vp.demand == pytest.approx((0.375, 0.375))


def test_virtual_profile_singleton():
    assert virtual_profile([((1,), 0.3)]).demand == pytest.approx((0.3,))


def test_virtual_profile_mismatched_lengths():
    with pytest.raises(ProfileError):
        virtual_profile([((1, 2), 0.5), ((1,), 0.5)])


def test_bottom_up_fig3():
    vp = virtual_profiles_bottom_up(fig3_hierarchy(), FIG3_PROFILES)
    assert vp["f2"].demand == pytest.approx((0.375, 0.375))
    assert vp["f2.1"].demand == (1.0, 2.0)


def test_inactive_sibling_weight_moves_to_active_one():
    spec = fig3_hierarchy()
    vp = virtual_profiles_bottom_up(spec, FIG3_PROFILES, active={"f1", "f2.1"})
    assert vp["f2"].demand == pytest.approx((0.25, 0.5))
    eff = effective_weights(spec, {"f1", "f2.1"})
    assert eff["f2.1"] == pytest.approx(0.5)
    assert "f2.2" not in eff


def test_effective_weights_rejects_internal_nodes():
    with pytest.raises(ProfileError):
        effective_weights(fig3_hierarchy(), {"f2"})


def test_bottom_up_missing_profile():
    with pytest.raises(ProfileError):
        virtual_profiles_bottom_up(fig3_hierarchy(), {"f1": (1, 1)})


def test_bottom_up_matches_symbolic_expansion():
    for spec, profiles in random_instances(seed=7, n=40):
        got = virtual_profiles_bottom_up(spec, profiles)
        want = symbolic_virtual_profiles(spec, profiles)
        for n in spec.nodes:
            if n == spec.root:
                continue
            assert got[n].demand == pytest.approx(tuple(want[n]), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(positive, min_size=1, max_size=4))
def test_normalized_profile_has_unit_maximum(p):
    n = normalize(p)
    assert max(n.values) == 1.0
    assert all(0 <= v <= 1 for v in n.values)
    assert np.allclose(np.asarray(n.values) * max(p), p)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.lists(positive, min_size=2, max_size=2), st.floats(0.01, 1)), min_size=1, max_size=5))
def test_virtual_profile_dominant_is_at_most_total_weight(children):
    vp = virtual_profile(children)
    total = sum(w for _, w in children)
    assert vp.mu <= total * (1 + 1e-12)
    # every child contributes its whole weight on its own dominant resource
    assert vp.mu >= max(w for _, w in children) * (1 - 1e-12)
