"""Hierarchical multi-resource schedulers.

All schedulers share one interface: the driver tells them when a leaf queue
becomes non-empty (:meth:`activate`) or empty (:meth:`deactivate`) and asks
for the next leaf to serve with :meth:`dispatch`, passing the head-of-line
packet profile of every backlogged leaf.

``collapsed-hdrfq``
    memoryless DRFQ over the leaves with flattened weights; the weights are
    recomputed whenever the set of backlogged leaves changes.
``dovetailing-hdrfq``
    dove-tailing DRFQ inside every sibling group; the root's choice is
    resolved lazily down the tree.
``naive-collapsed`` / ``flat-drfq``
    memoryless DRFQ over the leaves with their declared weights.
``naive-memoryless``
    memoryless DRFQ inside every sibling group, charging an internal node
    the largest head-of-line dominant time among its children.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .drfq import CLAMP, DOVETAIL, MEMORYLESS, GroupScheduler
from .hierarchy import HierarchySpec
from .profiles import PacketProfile, ProfileLike, as_profile, effective_weights, virtual_profiles_bottom_up

COLLAPSED = "collapsed-hdrfq"
DOVETAILING = "dovetailing-hdrfq"
NAIVE_COLLAPSED = "naive-collapsed"
NAIVE_MEMORYLESS = "naive-memoryless"
FLAT_DRFQ = "flat-drfq"
SCHEDULER_KINDS = (COLLAPSED, DOVETAILING, NAIVE_COLLAPSED, NAIVE_MEMORYLESS, FLAT_DRFQ)
HDRFQ_KINDS = (COLLAPSED, DOVETAILING)
NAIVE_KINDS = (NAIVE_COLLAPSED, NAIVE_MEMORYLESS)


def flatten_weights(
    spec: HierarchySpec,
    leaf_profiles: Mapping[str, ProfileLike],
    active: Iterable[str] | None = None,
) -> dict[str, float]:
    """Leaf weights of the equivalent one-level tree.

    ``phi'_i = phi_i * prod(phi_a / mu_a)`` over the strict ancestors ``a`` of
    ``i`` below the root, where ``mu_a`` is the dominant entry of ``a``'s
    virtual profile.  Weights are the effective ones for the given active set.
    """
    active_set = set(spec.leaves if active is None else active)
    vprof = virtual_profiles_bottom_up(spec, leaf_profiles, active_set)
    eff = effective_weights(spec, active_set)
    topo = spec.topology
    out = {}
    for leaf in spec.leaves:
        if leaf not in active_set:
            continue
        w = eff[leaf]
        for anc in topo.ancestors(leaf)[:-1]:
            w *= eff[anc] / vprof[anc].mu
        out[leaf] = w
    return out


@dataclass(frozen=True)
class DispatchDecision:
    leaf: str
    profile: PacketProfile
    decision_epoch: float


class Scheduler:
    kind = ""

    def __init__(
        self,
        spec: HierarchySpec,
        leaf_profiles: Mapping[str, ProfileLike] | None = None,
        *,
        reactivation: str = CLAMP,
        strict: bool = False,
    ):
        self.spec = spec
        self.topo = spec.topology
        self.leaf_profiles = {k: as_profile(v) for k, v in (leaf_profiles or {}).items()}
        self.reactivation = reactivation
        self.strict = strict
        self._backlogged: set[str] = set()

    @property
    def backlogged(self) -> frozenset[str]:
        return frozenset(self._backlogged)

    def activate(self, leaf: str) -> None:
        if leaf in self._backlogged:
            return
        if not self.spec[leaf].is_leaf:
            raise ValueError(f"{leaf!r} is not a leaf")
        self._backlogged.add(leaf)
        self._on_activate(leaf)

    def deactivate(self, leaf: str) -> None:
        if leaf not in self._backlogged:
            return
        self._backlogged.discard(leaf)
        self._on_deactivate(leaf)

    def dispatch(self, heads: Mapping[str, Sequence[float]]) -> str:
        """Pick the next leaf and account its head packet ``heads[leaf]``."""
        leaf = self.select(heads)
        self.charge(leaf, heads[leaf], heads)
        return leaf

    # subclass hooks
    def _on_activate(self, leaf: str) -> None:
        raise NotImplementedError

    def _on_deactivate(self, leaf: str) -> None:
        raise NotImplementedError

    def select(self, heads: Mapping[str, Sequence[float]]) -> str:
        raise NotImplementedError

    def charge(self, leaf: str, demand: Sequence[float], heads: Mapping[str, Sequence[float]]) -> None:
        raise NotImplementedError


class _FlatScheduler(Scheduler):
    """Memoryless DRFQ over the leaves with fixed declared weights."""

    def __init__(self, spec, leaf_profiles=None, **kw):
        super().__init__(spec, leaf_profiles, **kw)
        self.group = GroupScheduler(
            ((leaf, spec.nodes[leaf].weight) for leaf in spec.leaves),
            MEMORYLESS,
            reactivation=self.reactivation,
            strict=self.strict,
        )

    def _on_activate(self, leaf):
        self.group.set_active(leaf, True)

    def _on_deactivate(self, leaf):
        self.group.set_active(leaf, False)

    def select(self, heads):
        return self.group.next_member()

    def charge(self, leaf, demand, heads=None):
        self.group.charge(leaf, demand)


class NaiveCollapsedScheduler(_FlatScheduler):
    kind = NAIVE_COLLAPSED


class FlatDRFQScheduler(_FlatScheduler):
    kind = FLAT_DRFQ


class CollapsedScheduler(_FlatScheduler):
    """Memoryless DRFQ on the flattened tree, reflattened on every change."""

    kind = COLLAPSED

    def __init__(self, spec, leaf_profiles=None, **kw):
        super().__init__(spec, leaf_profiles, **kw)
        missing = [l for l in spec.leaves if l not in self.leaf_profiles]
        if missing:
            raise ValueError(f"collapsed scheduler needs profiles for leaves {missing}")
        self.flat_weights: dict[str, float] = {}

    def _reflatten(self) -> None:
        if not self._backlogged:
            return
        self.flat_weights = flatten_weights(self.spec, self.leaf_profiles, self._backlogged)
        for leaf, w in self.flat_weights.items():
            self.group.set_weight(leaf, w)

    def _on_activate(self, leaf):
        self._reflatten()
        self.group.set_active(leaf, True)

    def _on_deactivate(self, leaf):
        self.group.set_active(leaf, False)
        self._reflatten()


class _TreeScheduler(Scheduler):
    """One :class:`GroupScheduler` per internal node."""

    variant = DOVETAIL

    def __init__(self, spec, leaf_profiles=None, **kw):
        super().__init__(spec, leaf_profiles, **kw)
        self.groups: dict[str, GroupScheduler] = {
            nid: GroupScheduler(
                ((c, spec.nodes[c].weight) for c in spec.nodes[nid].children),
                self.variant,
                reactivation=self.reactivation,
                strict=self.strict and self.variant == MEMORYLESS,
            )
            for nid in spec.internal_nodes
        }

    def _on_activate(self, leaf):
        node = leaf
        parent = self.spec.nodes[node].parent
        while parent is not None:
            group = self.groups[parent]
            was_live = bool(group.active)
            group.set_active(node, True)
            if was_live:
                break
            node, parent = parent, self.spec.nodes[parent].parent

    def _on_deactivate(self, leaf):
        node = leaf
        parent = self.spec.nodes[node].parent
        while parent is not None:
            group = self.groups[parent]
            group.set_active(node, False)
            if group.active:
                break
            node, parent = parent, self.spec.nodes[parent].parent

    def select(self, heads):
        node = self.spec.root
        while not self.spec.nodes[node].is_leaf:
            node = self.groups[node].next_member()
        return node

    def path(self, leaf: str) -> list[tuple[str, str]]:
        """``(group, member)`` pairs from the leaf's parent up to the root."""
        out = []
        node = leaf
        parent = self.spec.nodes[node].parent
        while parent is not None:
            out.append((parent, node))
            node, parent = parent, self.spec.nodes[parent].parent
        return out


class DovetailScheduler(_TreeScheduler):
    kind = DOVETAILING
    variant = DOVETAIL

    def charge(self, leaf, demand, heads=None):
        for group, member in self.path(leaf):
            self.groups[group].charge(member, demand)


class NaiveMemorylessScheduler(_TreeScheduler):
    kind = NAIVE_MEMORYLESS
    variant = MEMORYLESS

    def charge(self, leaf, demand, heads):
        mu_leaf = max(demand)
        for group, member in self.path(leaf):
            if member == leaf:
                mu = mu_leaf
            else:
                mu = max(
                    max(heads[l]) for l in self.topo.leaves_under(member) if l in self._backlogged
                )
            self.groups[group].charge(member, mu)


_KINDS = {
    COLLAPSED: CollapsedScheduler,
    DOVETAILING: DovetailScheduler,
    NAIVE_COLLAPSED: NaiveCollapsedScheduler,
    NAIVE_MEMORYLESS: NaiveMemorylessScheduler,
    FLAT_DRFQ: FlatDRFQScheduler,
}


def make_scheduler(kind: str, spec: HierarchySpec, leaf_profiles=None, **kw) -> Scheduler:
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown scheduler kind {kind!r}; expected one of {SCHEDULER_KINDS}") from None
    return cls(spec, leaf_profiles, **kw)


def run_queues(
    scheduler: Scheduler,
    queues: Mapping[str, Iterable[ProfileLike]],
    events: Iterable[tuple[int, str, Iterable[ProfileLike]]] = (),
    limit: int | None = None,
) -> list[DispatchDecision]:
    """Drain finite per-leaf queues through ``scheduler`` in decision order.

    ``events`` are ``(decision_index, leaf, packets)`` triples appending packets
    to a leaf just before the given decision.  The decision epoch recorded is
    the decision index; the time-driven driver lives in :mod:`hdrfq.sim`.
    """
    qs: dict[str, deque[PacketProfile]] = {
        leaf: deque(as_profile(p) for p in pkts) for leaf, pkts in queues.items()
    }
    pending: dict[int, list[tuple[str, list[PacketProfile]]]] = {}
    for idx, leaf, pkts in events:
        pending.setdefault(idx, []).append((leaf, [as_profile(p) for p in pkts]))
    for leaf in scheduler.spec.leaves:
        if qs.get(leaf):
            scheduler.activate(leaf)
    out: list[DispatchDecision] = []
    k = 0
    while limit is None or k < limit:
        for leaf, pkts in pending.pop(k, ()):
            q = qs.setdefault(leaf, deque())
            q.extend(pkts)
            if q:
                scheduler.activate(leaf)
        if not scheduler.backlogged:
            if not pending:
                break
            k = min(pending)
            continue
        heads = {leaf: qs[leaf][0].demand for leaf in scheduler.backlogged}
        leaf = scheduler.dispatch(heads)
        pkt = qs[leaf].popleft()
        if not qs[leaf]:
            scheduler.deactivate(leaf)
        out.append(DispatchDecision(leaf, pkt, float(k)))
        k += 1
    return out


def backlogged_order(
    kind: str,
    spec: HierarchySpec,
    leaf_profiles: Mapping[str, ProfileLike],
    n: int,
    leaves: Iterable[str] | None = None,
    **kw,
) -> list[str]:
    """First ``n`` dispatches with the given leaves permanently backlogged."""
    sched = make_scheduler(kind, spec, leaf_profiles, **kw)
    chosen = list(spec.leaves if leaves is None else leaves)
    heads = {leaf: as_profile(leaf_profiles[leaf]).demand for leaf in chosen}
    for leaf in chosen:
        sched.activate(leaf)
    return [sched.dispatch(heads) for _ in range(n)]


def _schedule(kind, spec, queues, events=(), leaf_profiles=None, **kw):
    if leaf_profiles is None:
        leaf_profiles = {}
        for leaf, pkts in queues.items():
            pkts = list(pkts)
            if pkts:
                leaf_profiles[leaf] = pkts[0]
        for _, leaf, pkts in events:
            pkts = list(pkts)
            if pkts and leaf not in leaf_profiles:
                leaf_profiles[leaf] = pkts[0]
        for leaf in spec.leaves:
            leaf_profiles.setdefault(leaf, (1.0,) * _m(leaf_profiles))
    return run_queues(make_scheduler(kind, spec, leaf_profiles, **kw), queues, events)


def _m(profiles) -> int:
    for p in profiles.values():
        return len(as_profile(p))
    return 1


def collapsed_schedule(spec, queues, events=(), **kw) -> list[DispatchDecision]:
    return _schedule(COLLAPSED, spec, queues, events, **kw)


def dovetail_schedule(spec, queues, events=(), **kw) -> list[DispatchDecision]:
    return _schedule(DOVETAILING, spec, queues, events, **kw)


def naive_collapsed_schedule(spec, queues, **kw) -> list[DispatchDecision]:
    return _schedule(NAIVE_COLLAPSED, spec, queues, **kw)


def naive_memoryless_schedule(spec, queues, **kw) -> list[DispatchDecision]:
    return _schedule(NAIVE_MEMORYLESS, spec, queues, **kw)
