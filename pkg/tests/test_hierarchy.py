import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdrfq.hierarchy import HierarchyError, parse_hierarchy, validate_and_normalize
from hdrfq.presets import fig6_hierarchy
from hdrfq.randtrees import random_tree

from oracles import bfs_leaves, tree_tables

NINE = {
    "id": "R",
    "children": [
        {"id": "f1", "weight": 0.5, "children": [
            {"id": "f1.1", "weight": 0.2}, {"id": "f1.2", "weight": 0.3}]},
        {"id": "f2", "weight": 0.5, "children": [
            {"id": "f2.1", "weight": 0.2}, {"id": "f2.2", "weight": 0.3}]},
    ],
}


def test_two_group_document_parses_to_seven_nodes():
    spec = parse_hierarchy(json.dumps(NINE))
    assert len(spec.nodes) == 7
    assert spec.leaves == ("f1.1", "f1.2", "f2.1", "f2.2")
    assert spec.nodes["f2.1"].parent == "f2"


def test_single_leaf_tree():
    spec = validate_and_normalize(parse_hierarchy({"children": [{"weight": 1}]}))
    assert len(spec.nodes) == 2
    assert spec.leaves == ("1",)


def test_zero_weight_rejected():
    with pytest.raises(HierarchyError, match="weight must be positive"):
        parse_hierarchy({"children": [{"id": "a", "weight": 0}]})


@pytest.mark.parametrize("bad", [
    "not json",
    "[1, 2]",
    {"children": [{"id": "a", "weight": 1}, {"id": "a", "weight": 1}]},
    {"children": [{"id": "a"}]},
    {"children": [{"id": "a", "weight": "heavy"}]},
    {"children": [{"id": "a", "weight": True}]},
    {"children": "a"},
])
def test_malformed_documents(bad):
    with pytest.raises(HierarchyError):
        parse_hierarchy(bad)


def test_depth_limit():
    doc = {"id": "leaf", "weight": 1}
    for k in range(20):
        doc = {"id": f"n{k}", "weight": 1, "children": [doc]}
    with pytest.raises(HierarchyError, match="depth"):
        parse_hierarchy(doc)


def test_strict_keeps_consistent_weights():
    spec = parse_hierarchy(NINE)
    out = validate_and_normalize(spec, "strict")
    assert {n: out.nodes[n].weight for n in out.nodes} == {n: spec.nodes[n].weight for n in spec.nodes}


def test_renormalize_equal_siblings():
    spec = parse_hierarchy({"children": [{"id": "a", "weight": 2}, {"id": "b", "weight": 2}]})
    out = validate_and_normalize(spec, "renormalize")
    assert out.nodes["a"].weight == 0.5
    assert out.nodes["b"].weight == 0.5


def test_strict_rejects_inconsistent_sums():
    doc = {"children": [{"id": "p", "weight": 0.5, "children": [
        {"id": "x", "weight": 0.3}, {"id": "y", "weight": 0.3}]}, {"id": "q", "weight": 0.5}]}
    with pytest.raises(HierarchyError, match="sum"):
        validate_and_normalize(parse_hierarchy(doc), "strict")


def test_unknown_mode():
    with pytest.raises(ValueError):
        validate_and_normalize(parse_hierarchy(NINE), "loose")


def test_topology_queries():
    topo = parse_hierarchy(NINE).topology
    assert topo.ancestor("f2.1", 1) == "f2"
    assert topo.ancestor("f2.1", 2) == "R"
    assert set(topo.siblings("f1.1")) == {"f1.2"}
    assert topo.ancestor("R", 0) == "R"
    assert topo.siblings("R") == ()
    assert topo.depth("f1.2") == 2
    assert topo.depth("R") == 0


def test_fig6_leaves_under_matches_breadth_first_walk():
    spec = fig6_hierarchy()
    for nid in spec.nodes:
        assert set(spec.topology.leaves_under(nid)) == bfs_leaves(spec, nid)
    assert len(spec.leaves) == 15


def test_roundtrip_document():
    spec = fig6_hierarchy()
    again = parse_hierarchy(spec.dumps())
    assert again.to_document() == spec.to_document()


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_renormalized_random_trees_are_consistent(seed):
    spec = random_tree(np.random.default_rng(seed))
    validate_and_normalize(spec, "strict")
    parent, children, weight = tree_tables(spec)
    assert sum(weight[l] for l in spec.leaves) == pytest.approx(1.0, rel=1e-9)
    for n, kids in children.items():
        if kids:
            assert sum(weight[c] for c in kids) == pytest.approx(weight[n], rel=1e-9)
    # every non-root node has exactly one parent and reaches the root
    for n in parent:
        seen = set()
        while parent[n] is not None:
            assert n not in seen
            seen.add(n)
            n = parent[n]
        assert n == spec.root
