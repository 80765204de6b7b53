"""Closed-form delay bounds and ideal shares for the two H-DRFQ schedulers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .hierarchy import HierarchySpec
from .profiles import ProfileLike, as_profile, effective_weights, virtual_profiles_bottom_up


class BoundError(ValueError):
    pass


@dataclass(frozen=True)
class BoundReport:
    leaf: str
    collapsed_bound: float
    dovetail_bound: float
    # (level w, coefficient, max_r sum over the level's leaves, term value); w = 0 is the sibling term
    per_term_breakdown: list[tuple[int, float, float, float]] = field(default_factory=list)


def _max_sum(profiles: Mapping[str, ProfileLike], leaves: Iterable[str]) -> float:
    leaves = list(leaves)
    if not leaves:
        return 0.0
    m = len(as_profile(profiles[leaves[0]]))
    return max(sum(as_profile(profiles[j])[r] for j in leaves) for r in range(m))


def _check_positive(spec: HierarchySpec, leaf_profiles: Mapping[str, ProfileLike]) -> None:
    for leaf in spec.leaves:
        if leaf not in leaf_profiles:
            raise BoundError(f"missing profile for leaf {leaf!r}")
        if not as_profile(leaf_profiles[leaf]).strictly_positive():
            raise BoundError(f"leaf {leaf!r}: delay bounds need non-zero demand on every resource")


def collapsed_delay_bound(spec: HierarchySpec, leaf_profiles: Mapping[str, ProfileLike], leaf: str) -> float:
    """``max_r`` of the summed demands of every other leaf (siblings in the flattened tree)."""
    _check_positive(spec, leaf_profiles)
    if not spec[leaf].is_leaf:
        raise BoundError(f"{leaf!r} is not a leaf")
    return _max_sum(leaf_profiles, (j for j in spec.leaves if j != leaf))


def _dovetail_terms(spec, leaf_profiles, leaf, active=None):
    topo = spec.topology
    active_set = set(spec.leaves if active is None else active)
    vprof = virtual_profiles_bottom_up(spec, leaf_profiles, active_set)
    eff = effective_weights(spec, active_set)
    chain = [leaf] + topo.ancestors(leaf)  # P^0 .. P^H
    H = len(chain) - 1
    sib = _max_sum(leaf_profiles, topo.leaves_under_set(topo.siblings(leaf)))
    terms = [(0, 1.0, sib, sib)]
    coeff = 1.0
    for w in range(1, H):
        h = w - 1
        coeff *= eff[chain[h]] / vprof[chain[h + 1]].mu
        cousins = topo.leaves_under_set(topo.siblings(chain[w]))
        ms = _max_sum(leaf_profiles, cousins)
        terms.append((w, coeff, ms, coeff * ms))
    return terms


def dovetail_delay_bound(spec: HierarchySpec, leaf_profiles: Mapping[str, ProfileLike], leaf: str) -> float:
    """Sibling term plus, for each ancestor level ``w``, the leaves under the
    ancestor's siblings weighted by ``prod_{h<w} phi_{P^h} / mu_{P^{h+1}}``."""
    _check_positive(spec, leaf_profiles)
    if not spec[leaf].is_leaf:
        raise BoundError(f"{leaf!r} is not a leaf")
    return sum(t[3] for t in _dovetail_terms(spec, leaf_profiles, leaf))


def bound_report(spec: HierarchySpec, leaf_profiles: Mapping[str, ProfileLike], leaf: str) -> BoundReport:
    _check_positive(spec, leaf_profiles)
    terms = _dovetail_terms(spec, leaf_profiles, leaf)
    return BoundReport(
        leaf,
        collapsed_delay_bound(spec, leaf_profiles, leaf),
        sum(t[3] for t in terms),
        terms,
    )


def ideal_dominant_share(
    spec: HierarchySpec,
    leaf_profiles: Mapping[str, ProfileLike],
    node: str,
    active: Iterable[str] | None = None,
) -> float:
    """Long-run dominant-resource service of ``node`` as a fraction of the
    root's: ``prod_h phi_{P^h} / mu_{P^{h+1}}`` up the ancestor chain."""
    active_set = set(spec.leaves if active is None else active)
    vprof = virtual_profiles_bottom_up(spec, leaf_profiles, active_set)
    eff = effective_weights(spec, active_set)
    if node not in eff:
        raise BoundError(f"node {node!r} has no active leaf")
    share = 1.0
    cur = node
    for anc in spec.topology.ancestors(node):
        share *= eff[cur] / vprof[anc].mu
        cur = anc
    return share


def guaranteed_share(spec: HierarchySpec, node: str) -> float:
    """Product of ``phi / phi_parent`` up the chain (declared weights)."""
    share = 1.0
    cur = node
    for anc in spec.topology.ancestors(node):
        share *= spec.nodes[cur].weight / spec.nodes[anc].weight
        cur = anc
    return share
