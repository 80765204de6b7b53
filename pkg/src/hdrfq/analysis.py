"""Trace-level fairness metrics and property checks.

The closed-form bounds live in :mod:`hdrfq.bounds` and are re-exported here.
All times reported by this module are in microseconds, the unit of packet
profiles; traces themselves are in nanoseconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .bounds import (
    BoundError,
    BoundReport,
    bound_report,
    collapsed_delay_bound,
    dovetail_delay_bound,
    guaranteed_share,
    ideal_dominant_share,
)
from .hierarchy import HierarchySpec
from .profiles import PacketProfile, ProfileLike, as_profile, dominant, virtual_profiles_bottom_up
from .sim.engine import Trace, run
from .sim.metrics import BusyIndex
from .sim.scenario import FlowSource, Scenario
from .sim.traffic import NS_PER_S

__all__ = [
    "BoundError",
    "BoundReport",
    "ProbeVerdict",
    "ShareReport",
    "WFIReport",
    "backlog_intervals",
    "bound_report",
    "ContainmentReport",
    "collapsed_delay_bound",
    "delay_containment",
    "dovetail_delay_bound",
    "empirical_wfi",
    "guaranteed_share",
    "ideal_dominant_share",
    "share_guarantee_report",
    "strategyproofness_probe",
]


class AnalysisError(ValueError):
    pass


# -- backlog intervals ------------------------------------------------------------


def backlog_intervals(trace: Trace, leaves: Iterable[str]) -> list[tuple[int, int]]:
    """Merged intervals (ns) during which at least one of ``leaves`` had a
    packet waiting for dispatch.  Packets still queued at the end extend to
    the horizon."""
    spans = []
    for leaf in leaves:
        if leaf not in trace.leaves:
            continue
        rows = trace.leaf == trace.leaves.index(leaf)
        spans.extend(zip(trace.arrival[rows].tolist(), trace.dispatch[rows].tolist()))
        if leaf in trace.pending_since:
            spans.append((trace.pending_since[leaf], trace.horizon_ns))
    spans.sort()
    merged: list[list[int]] = []
    for a, b in spans:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


def _covers(intervals: list[tuple[int, int]], t1: int, t2: int) -> bool:
    return any(a <= t1 and b >= t2 for a, b in intervals)


# -- WFI ----------------------------------------------------------------------------


@dataclass(frozen=True)
class WFIReport:
    node: str
    alpha: float  # us
    max_start_delay: float  # us
    worst_interval: tuple[int, int] | None  # ns
    ideal_fraction: float  # phi_i / mu_q


def _dominant_resources(spec, leaf_profiles, node):
    vprof = virtual_profiles_bottom_up(spec, leaf_profiles)
    parent = spec.nodes[node].parent
    d_i = dominant(vprof[node]).resource
    d_q = dominant(vprof[parent]).resource
    return d_i, d_q


def empirical_wfi(
    trace: Trace,
    spec: HierarchySpec,
    node: str,
    leaf_profiles: Mapping[str, ProfileLike],
) -> WFIReport:
    """Largest lag of ``node``'s dominant service behind its ideal fraction of
    its parent's, over the ``[arrival, completion]`` interval of each of its
    packets, floored at 0."""
    parent = spec.nodes[node].parent
    if parent is None:
        raise AnalysisError("the root has no fair index")
    under = spec.topology.leaves_under(node)
    rows = trace.mask(under)
    if not rows.any():
        raise AnalysisError(f"node {node!r} was never backlogged")
    d_i, d_q = _dominant_resources(spec, leaf_profiles, node)
    frac = ideal_dominant_share(spec, leaf_profiles, node) / ideal_dominant_share(spec, leaf_profiles, parent)
    idx = BusyIndex(trace)
    a = trace.arrival[rows]
    d = trace.completion[rows]
    w_i = idx.busy(under, d_i, a, d)
    w_q = idx.busy(spec.topology.leaves_under(parent), d_q, a, d)
    lag = frac * w_q - w_i
    k = int(np.argmax(lag))
    alpha = max(0.0, float(lag[k])) / 1000.0
    worst = (int(a[k]), int(d[k])) if lag[k] > 0 else None
    sd = trace.start_delay[rows]
    return WFIReport(node, alpha, float(sd.max()) / 1000.0, worst, frac)


# -- bound containment -------------------------------------------------------------


@dataclass(frozen=True)
class ContainmentReport:
    kind: str
    checked: int  # packets that arrived to an idle leaf
    violations: int
    worst_ratio: float  # largest start delay / bound
    worst_leaf: str | None
    bounds_us: dict = field(default_factory=dict)
    per_leaf_max_us: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0


def delay_containment(
    trace: Trace,
    spec: HierarchySpec,
    leaf_profiles: Mapping[str, ProfileLike],
    kind: str,
    tolerance_ns: int | None = None,
) -> ContainmentReport:
    """Compare the start delay of every packet that found its leaf idle with
    the closed-form bound of scheduler ``kind``.

    The collapsed bound applies to ``collapsed-hdrfq`` and the dove-tailing
    bound to ``dovetailing-hdrfq``.  ``tolerance_ns`` absorbs rounding of
    service times to whole nanoseconds (default: one per leaf).
    """
    if kind == "collapsed-hdrfq":
        bound_fn = collapsed_delay_bound
    elif kind == "dovetailing-hdrfq":
        bound_fn = dovetail_delay_bound
    else:
        raise AnalysisError(f"no delay bound for scheduler {kind!r}")
    tol = len(spec.leaves) if tolerance_ns is None else tolerance_ns
    idle = trace.idle_arrivals()
    delays = trace.start_delay
    bounds = {}
    maxima = {}
    checked = violations = 0
    worst, worst_leaf = 0.0, None
    for li, leaf in enumerate(trace.leaves):
        rows = idle & (trace.leaf == li)
        if not rows.any():
            continue
        b = bound_fn(spec, leaf_profiles, leaf)
        d = delays[rows]
        bounds[leaf] = b
        maxima[leaf] = float(d.max()) / 1000.0
        checked += int(rows.sum())
        violations += int((d > b * 1000.0 + tol).sum())
        ratio = float(d.max()) / (b * 1000.0)
        if ratio > worst:
            worst, worst_leaf = ratio, leaf
    return ContainmentReport(kind, checked, violations, worst, worst_leaf, bounds, maxima)


# -- share guarantee -------------------------------------------------------------------


@dataclass(frozen=True)
class ShareReport:
    node: str
    window: tuple[float, float]  # seconds
    measured_dominant_share: float  # best fraction of one parent resource
    guaranteed_share: float  # phi_i / phi_parent
    ideal_share: float  # dominant share relative to the root under fluid progressive filling
    violation_slack: float  # us: one packet of the group
    deficit: float  # us: how far the best resource falls short of the guarantee (<= 0 is fine)
    guaranteed_product: float = 1.0
    flagged: bool = False


def share_guarantee_report(
    trace: Trace,
    spec: HierarchySpec,
    window: tuple[float, float],
    leaf_profiles: Mapping[str, ProfileLike] | None = None,
) -> list[ShareReport]:
    """Check every node backlogged throughout ``window`` against its guarantee.

    A node is flagged when on every resource its busy time is short of
    ``phi_i / phi_parent`` of its parent's by more than one packet (the
    largest dominant time seen in the parent's subtree during the window).
    """
    t1 = int(round(window[0] * NS_PER_S))
    t2 = int(round(window[1] * NS_PER_S))
    if not 0 <= t1 < t2 <= trace.horizon_ns:
        raise AnalysisError("window must lie inside the simulated horizon")
    topo = spec.topology
    idx = BusyIndex(trace)
    backlogged_leaves = {
        leaf for leaf in spec.leaves if _covers(backlog_intervals(trace, [leaf]), t1, t2)
    }
    in_window = (trace.dispatch >= t1) & (trace.dispatch < t2)
    dur = trace.duration
    out = []
    for nid in spec.preorder():
        parent = spec.nodes[nid].parent
        if parent is None:
            continue
        under = topo.leaves_under(nid)
        if not _covers(backlog_intervals(trace, under), t1, t2):
            continue
        busy_i = np.array([int(idx.busy(under, r, t1, t2)) for r in range(trace.m)])
        busy_p = np.array([int(idx.busy(topo.leaves_under(parent), r, t1, t2)) for r in range(trace.m)])
        g = spec.nodes[nid].weight / spec.nodes[parent].weight
        group_rows = in_window & trace.mask(topo.leaves_under(parent))
        slack = int(dur[group_rows].max()) if group_rows.any() else 0
        margin = busy_i - g * busy_p
        best = float(margin.max())
        ratios = [busy_i[r] / busy_p[r] for r in range(trace.m) if busy_p[r] > 0]
        measured = max(ratios) if ratios else 0.0
        ideal = float("nan")
        if leaf_profiles is not None and backlogged_leaves & set(under):
            ideal = ideal_dominant_share(spec, leaf_profiles, nid, backlogged_leaves)
        out.append(
            ShareReport(
                node=nid,
                window=(window[0], window[1]),
                measured_dominant_share=measured,
                guaranteed_share=g,
                ideal_share=ideal,
                violation_slack=slack / 1000.0,
                deficit=-best / 1000.0,
                guaranteed_product=guaranteed_share(spec, nid),
                flagged=best < -slack,
            )
        )
    return out


# -- strategy-proofness -------------------------------------------------------------


@dataclass(frozen=True)
class ProbeVerdict:
    passed: bool
    leaves: tuple[str, ...]
    honest_counts: np.ndarray  # cumulative dispatches at each window end
    inflated_counts: np.ndarray
    window_edges_ns: np.ndarray
    max_excess: int  # largest inflated - honest lead, packets
    details: dict = field(default_factory=dict)

    @property
    def honest_window_counts(self) -> np.ndarray:
        return np.diff(np.concatenate(([0], self.honest_counts)))

    @property
    def inflated_window_counts(self) -> np.ndarray:
        return np.diff(np.concatenate(([0], self.inflated_counts)))


def _cumulative_counts(trace: Trace, leaves, edges) -> np.ndarray:
    disp = np.sort(trace.dispatch[trace.mask(leaves)])
    return np.searchsorted(disp, edges[1:], side="left")


def strategyproofness_probe(
    scenario: Scenario,
    leaf: str | Iterable[str],
    inflated_profile: ProfileLike | Mapping[str, ProfileLike],
    *,
    window: float | None = None,
    slack_packets: int = 1,
) -> ProbeVerdict:
    """Paired runs: honest ``scenario`` versus one where ``leaf`` (or a group of
    leaves) declares inflated demands.

    The probe passes when, at the end of every window, the inflated run has
    dispatched no more packets from the probed leaves than the honest run plus
    ``slack_packets``.
    """
    leaves = (leaf,) if isinstance(leaf, str) else tuple(leaf)
    if not leaves:
        raise AnalysisError("no leaves to probe")
    if isinstance(inflated_profile, Mapping):
        inflated = {l: as_profile(inflated_profile[l]) for l in leaves}
    else:
        inflated = {l: as_profile(inflated_profile) for l in leaves}
    honest_profiles = {}
    for f in scenario.flows:
        if f.leaf in leaves:
            honest_profiles.setdefault(f.leaf, []).append(f.nominal_profile(scenario.resources))
    for l in leaves:
        if l not in honest_profiles:
            raise AnalysisError(f"leaf {l!r} has no traffic in the scenario")
        new = inflated[l]
        for old in honest_profiles[l]:
            _check_inflation(l, old, new)
    flows = []
    for f in scenario.flows:
        if f.leaf in leaves:
            flows.append(_with_profile(f, inflated[f.leaf]))
        else:
            flows.append(f)
    cheat = scenario.replace(flows=tuple(flows))
    honest_trace = run(scenario)
    cheat_trace = run(cheat)
    w = scenario.share_window if window is None else window
    w_ns = int(round(w * NS_PER_S))
    edges = np.arange(0, scenario_horizon_ns(scenario) + 1, w_ns, dtype=np.int64)
    if edges[-1] != scenario_horizon_ns(scenario):
        edges = np.append(edges, scenario_horizon_ns(scenario))
    h = _cumulative_counts(honest_trace, leaves, edges)
    c = _cumulative_counts(cheat_trace, leaves, edges)
    excess = int((c - h).max()) if len(h) else 0
    return ProbeVerdict(
        passed=excess <= slack_packets,
        leaves=leaves,
        honest_counts=h,
        inflated_counts=c,
        window_edges_ns=edges,
        max_excess=excess,
        details={"honest_total": len(honest_trace), "inflated_total": len(cheat_trace)},
    )


def scenario_horizon_ns(scenario: Scenario) -> int:
    return int(round(scenario.horizon * NS_PER_S))


def _check_inflation(leaf: str, old: PacketProfile, new: PacketProfile) -> None:
    if len(old) != len(new):
        raise AnalysisError(f"leaf {leaf!r}: inflated profile has the wrong resource count")
    if any(n < o - 1e-12 for n, o in zip(new, old)):
        raise AnalysisError(f"leaf {leaf!r}: inflated profile {tuple(new)} does not dominate {tuple(old)}")
    if not any(n > o + 1e-12 for n, o in zip(new, old)):
        raise AnalysisError(f"leaf {leaf!r}: inflated profile is not larger than the honest one anywhere")


def _with_profile(flow: FlowSource, profile: PacketProfile) -> FlowSource:
    from dataclasses import replace

    return replace(flow, profile=tuple(profile))
