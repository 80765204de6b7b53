"""Busy-time accounting, windowed shares and delay statistics over a trace."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..hierarchy import HierarchySpec
from .engine import Trace
from .traffic import NS_PER_S

DEFAULT_QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.8, 0.9, 0.95, 0.99, 1.0)


class BusyIndex:
    """Cumulative busy time per (leaf, resource), queryable at arbitrary instants.

    Per resource the busy intervals of all packets are disjoint and sorted
    (each stage is FIFO), so the busy time before ``t`` is a prefix sum minus
    the unfinished part of the last interval that started by ``t``.
    """

    def __init__(self, trace: Trace):
        self.trace = trace
        self._starts: dict[tuple[int, int], np.ndarray] = {}
        self._fins: dict[tuple[int, int], np.ndarray] = {}
        self._prefix: dict[tuple[int, int], np.ndarray] = {}
        for li in range(len(trace.leaves)):
            rows = np.flatnonzero(trace.leaf == li)
            for r in range(trace.m):
                s = trace.start[rows, r]
                f = trace.finish[rows, r]
                self._starts[li, r] = s
                self._fins[li, r] = f
                self._prefix[li, r] = np.concatenate(([0], np.cumsum(f - s)))

    def leaf_busy_until(self, li: int, r: int, t) -> np.ndarray:
        s = self._starts[li, r]
        f = self._fins[li, r]
        pre = self._prefix[li, r]
        t = np.asarray(t, dtype=np.int64)
        if not len(s):
            return np.zeros(t.shape, dtype=np.int64)
        idx = np.searchsorted(s, t, side="right")
        last = np.maximum(idx - 1, 0)
        over = np.where(idx > 0, np.maximum(0, f[last] - t), 0)
        return pre[idx] - over

    def busy_until(self, leaves, r: int, t) -> np.ndarray:
        """Total busy time of ``leaves`` on resource ``r`` during ``[0, t)``."""
        t = np.asarray(t, dtype=np.int64)
        total = np.zeros(t.shape, dtype=np.int64)
        for leaf in leaves:
            if leaf in self.trace.leaves:
                total = total + self.leaf_busy_until(self.trace.leaves.index(leaf), r, t)
        return total

    def busy(self, leaves, r: int, t1, t2) -> np.ndarray:
        return self.busy_until(leaves, r, t2) - self.busy_until(leaves, r, t1)


def busy_by_node(trace: Trace, spec: HierarchySpec, t1: int | None = None, t2: int | None = None) -> dict[str, np.ndarray]:
    """Exact integer busy time (ns) per node and resource over ``[t1, t2)``."""
    idx = BusyIndex(trace)
    lo = 0 if t1 is None else t1
    hi = int(trace.finish.max(initial=0)) + 1 if t2 is None else t2
    topo = spec.topology
    return {
        nid: np.array([int(idx.busy(topo.leaves_under(nid), r, lo, hi)) for r in range(trace.m)], dtype=np.int64)
        for nid in spec.nodes
    }


@dataclass(frozen=True)
class WindowedShares:
    edges_ns: np.ndarray  # (k + 1,)
    nodes: tuple[str, ...]
    share: np.ndarray  # (nodes, k, m): busy / window length
    machine_share: np.ndarray  # share scaled by each resource's capacity fraction
    resource_names: tuple[str, ...]

    @property
    def dominant(self) -> np.ndarray:
        return self.share.max(axis=2)

    def node(self, nid: str) -> np.ndarray:
        return self.share[self.nodes.index(nid)]

    def header(self) -> list[str]:
        cols = ["window_start_s", "window_end_s", "node"]
        for r, name in enumerate(self.resource_names, start=1):
            cols += [f"share_r{r}_{name}", f"machine_share_r{r}_{name}"]
        return cols + ["dominant_share"]

    def rows(self):
        dom = self.dominant
        for w in range(len(self.edges_ns) - 1):
            t1 = self.edges_ns[w] / NS_PER_S
            t2 = self.edges_ns[w + 1] / NS_PER_S
            for n, nid in enumerate(self.nodes):
                row = [f"{t1:.9g}", f"{t2:.9g}", nid]
                for r in range(self.share.shape[2]):
                    row += [f"{self.share[n, w, r]:.9g}", f"{self.machine_share[n, w, r]:.9g}"]
                row.append(f"{dom[n, w]:.9g}")
                yield row


def windowed_shares(trace: Trace, spec: HierarchySpec, window: float, horizon: float | None = None) -> WindowedShares:
    """Per-window resource shares of every node.

    The share of resource ``r`` is the busy time of the node's leaves on ``r``
    divided by the window length (the last window may be shorter); the dominant share is the largest of them.
    ``machine_share`` rescales by the resource's capacity fraction (a CPU
    share of 1.0 at fraction 0.2 is 20% of the machine).
    """
    if window <= 0:
        raise ValueError("window must be positive")
    end = trace.horizon_ns if horizon is None else int(round(horizon * NS_PER_S))
    w_ns = int(round(window * NS_PER_S))
    edges = np.arange(0, end + 1, w_ns, dtype=np.int64)
    if edges[-1] != end:
        # a shorter last window covers the tail
        edges = np.append(edges, end)
    idx = BusyIndex(trace)
    topo = spec.topology
    nodes = tuple(spec.preorder())
    share = np.zeros((len(nodes), len(edges) - 1, trace.m))
    lengths = np.diff(edges).astype(float)
    for n, nid in enumerate(nodes):
        for r in range(trace.m):
            cum = idx.busy_until(topo.leaves_under(nid), r, edges)
            share[n, :, r] = np.diff(cum) / lengths
    fr = np.asarray(trace.capacity_fractions or (1.0,) * trace.m)
    return WindowedShares(edges, nodes, share, share * fr, trace.resource_names or tuple(f"r{r}" for r in range(1, trace.m + 1)))


@dataclass(frozen=True)
class DelayRow:
    group: str
    count: int
    mean_ns: float
    max_ns: int
    quantiles: tuple[float, ...]


@dataclass(frozen=True)
class DelayStats:
    group_by: str
    quantile_levels: tuple[float, ...]
    rows: list[DelayRow]

    def header(self) -> list[str]:
        return ["group", "count", "mean_ns", "max_ns"] + [f"q{q:g}_ns" for q in self.quantile_levels]

    def table(self):
        for row in self.rows:
            yield [row.group, row.count, f"{row.mean_ns:.6f}", row.max_ns] + [f"{q:.6f}" for q in row.quantiles]

    def by_group(self) -> dict[str, DelayRow]:
        return {row.group: row for row in self.rows}


def level_of(spec: HierarchySpec, leaf: str) -> str:
    return f"L{spec.topology.depth(leaf)}"


def delay_stats(
    trace: Trace,
    spec: HierarchySpec,
    group_by: str = "leaf",
    quantiles=DEFAULT_QUANTILES,
    *,
    mask: np.ndarray | None = None,
) -> DelayStats:
    """Mean, max and quantiles of start delay grouped by leaf, level or weight."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    if group_by not in ("leaf", "level", "weight"):
        raise ValueError(f"unknown grouping {group_by!r}")
    delays = trace.start_delay
    names = trace.leaf_names()
    if group_by == "leaf":
        keys = {leaf: leaf for leaf in trace.leaves}
    elif group_by == "level":
        keys = {leaf: level_of(spec, leaf) for leaf in trace.leaves}
    else:
        keys = {leaf: f"{spec.nodes[leaf].weight:.6g}" for leaf in trace.leaves}
    groups = np.array([keys[n] for n in names], dtype=object)
    sel = np.ones(len(trace), dtype=bool) if mask is None else mask
    order = sorted(set(keys.values()), key=float if group_by == "weight" else str)
    rows = []
    for g in order:
        d = delays[(groups == g) & sel]
        if not len(d):
            continue
        qs = tuple(float(x) for x in np.quantile(d, quantiles))
        rows.append(DelayRow(g, int(len(d)), float(d.mean()), int(d.max()), qs))
    return DelayStats(group_by, tuple(quantiles), rows)
