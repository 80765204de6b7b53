"""Packet profiles, dominant resources and per-node virtual profiles.

A packet profile is the vector of processing times (microseconds) a packet
needs on each of the ``m`` resources.  Internal nodes of a hierarchy get a
*virtual* profile: the weight-scaled sum of their active children's
normalized profiles, so that a group can be scheduled as if it were one
backlogged flow with a fixed demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

from .hierarchy import HierarchySpec

TIME_ATOL = 1e-9


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class PacketProfile:
    demand: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.demand) < 1:
            raise ProfileError("profile needs at least one resource")
        if any(not math.isfinite(d) or d < 0 for d in self.demand):
            raise ProfileError(f"profile entries must be finite and non-negative: {self.demand}")
        if max(self.demand) <= 0:
            raise ProfileError("profile must have at least one positive entry")

    @classmethod
    def of(cls, *values: float) -> PacketProfile:
        return cls(tuple(float(v) for v in values))

    @property
    def m(self) -> int:
        return len(self.demand)

    @property
    def mu(self) -> float:
        return max(self.demand)

    def __len__(self) -> int:
        return len(self.demand)

    def __getitem__(self, r: int) -> float:
        return self.demand[r]

    def __iter__(self):
        return iter(self.demand)

    def scaled(self, c: float) -> PacketProfile:
        return PacketProfile(tuple(d * c for d in self.demand))

    def strictly_positive(self) -> bool:
        return all(d > 0 for d in self.demand)


ProfileLike = Union[PacketProfile, Sequence[float]]


def as_profile(p: ProfileLike) -> PacketProfile:
    if isinstance(p, PacketProfile):
        return p
    return PacketProfile(tuple(float(v) for v in p))


@dataclass(frozen=True)
class DominantInfo:
    resource: int  # 0-based index
    mu: float


@dataclass(frozen=True)
class NormalizedProfile:
    values: tuple[float, ...]

    def __iter__(self):
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)


def dominant(profile: ProfileLike) -> DominantInfo:
    """Largest demand and the lowest resource index attaining it."""
    p = as_profile(profile)
    mu = p.mu
    return DominantInfo(p.demand.index(mu), mu)


def normalize(profile: ProfileLike) -> NormalizedProfile:
    p = as_profile(profile)
    mu = p.mu
    values = tuple(1.0 if d == mu else d / mu for d in p.demand)
    return NormalizedProfile(values)


def virtual_profile(children: Iterable[tuple[NormalizedProfile | ProfileLike, float]]) -> PacketProfile:
    """Weighted sum of children's normalized profiles.

    Entries may be given either already normalized or as raw profiles; raw
    profiles are normalized first.
    """
    items = list(children)
    if not items:
        raise ProfileError("virtual profile needs at least one child")
    total: list[float] | None = None
    for prof, weight in items:
        vals = prof.values if isinstance(prof, NormalizedProfile) else normalize(prof).values
        if total is None:
            total = [0.0] * len(vals)
        elif len(vals) != len(total):
            raise ProfileError(f"mismatched resource counts: {len(vals)} vs {len(total)}")
        for r, v in enumerate(vals):
            total[r] += v * weight
    assert total is not None
    return PacketProfile(tuple(total))


def effective_weights(spec: HierarchySpec, active: Iterable[str] | None = None) -> dict[str, float]:
    """Weights after inactive siblings' shares are handed to active ones.

    Every node with at least one active leaf below it gets
    ``phi_c * phi_parent / sum(phi of active siblings incl. c)``, so the active
    members of a sibling group always add up to the parent's declared weight.
    The root keeps its own weight.  Nodes with no active descendant are absent.
    """
    topo = spec.topology
    active_leaves = set(spec.leaves if active is None else active)
    unknown = active_leaves - set(spec.leaves)
    if unknown:
        raise ProfileError(f"active set contains non-leaves: {sorted(unknown)}")
    live = {n for n in spec.nodes if any(l in active_leaves for l in topo.leaves_under(n))}
    out: dict[str, float] = {}
    if spec.root in live:
        out[spec.root] = spec.nodes[spec.root].weight
    for nid in spec.internal_nodes:
        if nid not in live:
            continue
        node = spec.nodes[nid]
        kids = [c for c in node.children if c in live]
        denom = sum(spec.nodes[c].weight for c in kids)
        for c in kids:
            out[c] = spec.nodes[c].weight * node.weight / denom
    return out


def virtual_profiles_bottom_up(
    spec: HierarchySpec,
    leaf_profiles: Mapping[str, ProfileLike],
    active: Iterable[str] | None = None,
) -> dict[str, PacketProfile]:
    """Profiles for every node that has an active leaf below it.

    Leaves map to their own profiles.  An internal node maps to the virtual
    profile over its active children, each child weighted by its effective
    weight (see :func:`effective_weights`).
    """
    active_set = set(spec.leaves if active is None else active)
    if not active_set:
        raise ProfileError("no active leaves")
    missing = [l for l in active_set if l not in leaf_profiles]
    if missing:
        raise ProfileError(f"missing profiles for active leaves: {sorted(missing)}")
    eff = effective_weights(spec, active_set)
    out: dict[str, PacketProfile] = {}
    for nid in spec.postorder():
        if nid not in eff:
            continue
        node = spec.nodes[nid]
        if node.is_leaf:
            out[nid] = as_profile(leaf_profiles[nid])
        else:
            out[nid] = virtual_profile(
                (normalize(out[c]), eff[c]) for c in node.children if c in eff
            )
    return out
