"""Discrete-event simulation of a store-and-forward multi-resource pipeline.

Packets pass through the resources in declared order.  A packet may start on
resource ``r`` once it has finished on ``r - 1`` and ``r`` is free, so every
stage after the first is a FIFO queue.  The scheduler is consulted each time
resource 1 becomes idle while some leaf is backlogged.  Time is kept in
integer nanoseconds; profile microseconds are rounded half-to-even.
"""

from __future__ import annotations

import csv
import heapq
import io
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..schedulers import Scheduler, make_scheduler
from .scenario import CPU_COST_MODELS, Scenario, module_kind
from .traffic import NS_PER_S, generate_arrivals


@dataclass
class Trace:
    """Columnar per-packet record of one run, sorted by dispatch."""

    leaves: tuple[str, ...]
    leaf: np.ndarray  # index into ``leaves``
    seq: np.ndarray
    arrival: np.ndarray  # ns
    dispatch: np.ndarray
    start: np.ndarray  # (n, m) ns
    finish: np.ndarray  # (n, m) ns
    size: np.ndarray  # bytes
    horizon_ns: int
    scheduler: str = ""
    capacity_fractions: tuple[float, ...] = ()
    resource_names: tuple[str, ...] = ()
    # arrival time of the oldest packet still queued at the end, -1 if none
    pending_since: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.leaf)

    @property
    def m(self) -> int:
        return self.start.shape[1]

    @property
    def start_delay(self) -> np.ndarray:
        return self.start[:, 0] - self.arrival

    @property
    def completion(self) -> np.ndarray:
        return self.finish[:, -1]

    @property
    def duration(self) -> np.ndarray:
        return self.finish - self.start

    def leaf_names(self) -> np.ndarray:
        return np.asarray(self.leaves, dtype=object)[self.leaf]

    def order(self) -> list[str]:
        return [self.leaves[i] for i in self.leaf]

    def mask(self, leaves) -> np.ndarray:
        idx = [self.leaves.index(l) for l in leaves if l in self.leaves]
        return np.isin(self.leaf, idx)

    def idle_arrivals(self) -> np.ndarray:
        """Packets that found their leaf queue empty on arrival."""
        out = np.zeros(len(self), dtype=bool)
        for li in range(len(self.leaves)):
            rows = np.flatnonzero(self.leaf == li)
            if not len(rows):
                continue
            arr = self.arrival[rows]
            disp = self.dispatch[rows]
            idle = np.ones(len(rows), dtype=bool)
            # the previous packet of the leaf left before this one arrived
            idle[1:] = disp[:-1] < arr[1:]
            out[rows] = idle
        return out

    def header(self) -> list[str]:
        cols = ["leaf", "seq", "arrival_ns", "dispatch_ns"]
        for r in range(1, self.m + 1):
            cols += [f"start_r{r}_ns", f"finish_r{r}_ns"]
        return cols + ["start_delay_ns", "completion_ns"]

    def rows(self):
        names = self.leaves
        sd = self.start_delay
        comp = self.completion
        for k in range(len(self)):
            row = [names[self.leaf[k]], int(self.seq[k]), int(self.arrival[k]), int(self.dispatch[k])]
            for r in range(self.m):
                row += [int(self.start[k, r]), int(self.finish[k, r])]
            row += [int(sd[k]), int(comp[k])]
            yield row

    def to_csv(self, path: str | Path | None = None) -> str | None:
        """Write the trace as CSV; returns the text when no path is given."""
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        w.writerows(self.rows())
        text = buf.getvalue()
        if path is None:
            return text
        Path(path).write_text(text)
        return None


class _Heads(Mapping):
    """Head-of-line profile (microseconds) of every backlogged leaf."""

    def __init__(self, sched: Scheduler, index: dict[str, int], head: list[int], dur_us: list[np.ndarray]):
        self._sched = sched
        self._index = index
        self._head = head
        self._dur = dur_us

    def __getitem__(self, leaf: str):
        li = self._index[leaf]
        return self._dur[li][self._head[li]].tolist()

    def __iter__(self):
        return iter(self._sched.backlogged)

    def __len__(self) -> int:
        return len(self._sched.backlogged)


def _durations_ns(scenario: Scenario, flow, sizes: np.ndarray) -> np.ndarray:
    m = scenario.m
    if flow.profile is not None:
        row = np.rint(np.asarray(flow.profile, dtype=float) * 1000.0)
        return np.tile(row.astype(np.int64), (len(sizes), 1))
    out = np.empty((len(sizes), m), dtype=float)
    for r, res in enumerate(scenario.resources):
        if res.name == "cpu":
            coef, intercept = CPU_COST_MODELS[module_kind(flow.module)]
            us = coef * sizes + intercept
        else:
            us = sizes * 8.0 / res.link_rate * 1e6
        out[:, r] = us / res.capacity_fraction
    return np.rint(out * 1000.0).astype(np.int64)


def _leaf_streams(scenario: Scenario):
    """Per-leaf merged arrival times, durations and sizes."""
    leaves = scenario.hierarchy.leaves
    per_leaf: dict[str, list] = {leaf: [] for leaf in leaves}
    for idx, flow in enumerate(scenario.flows):
        arr = generate_arrivals(flow, scenario.seed, scenario.horizon, index=idx)
        per_leaf[flow.leaf].append((arr.times_ns, _durations_ns(scenario, flow, arr.sizes), arr.sizes))
    times, durs, sizes = [], [], []
    for leaf in leaves:
        parts = per_leaf[leaf]
        if not parts:
            times.append(np.zeros(0, dtype=np.int64))
            durs.append(np.zeros((0, scenario.m), dtype=np.int64))
            sizes.append(np.zeros(0))
            continue
        t = np.concatenate([p[0] for p in parts])
        d = np.concatenate([p[1] for p in parts])
        s = np.concatenate([p[2] for p in parts])
        order = np.argsort(t, kind="stable")
        times.append(t[order])
        durs.append(d[order])
        sizes.append(s[order])
    return times, durs, sizes


def run(scenario: Scenario, scheduler: Scheduler | None = None) -> Trace:
    """Simulate ``scenario`` and return its packet trace."""
    spec = scenario.hierarchy
    leaves = spec.leaves
    index = {leaf: i for i, leaf in enumerate(leaves)}
    if scheduler is None:
        scheduler = make_scheduler(
            scenario.scheduler, spec, scenario.nominal_profiles(), reactivation=scenario.reactivation
        )
    m = scenario.m
    times, durs, sizes = _leaf_streams(scenario)
    dur_us = [d / 1000.0 for d in durs]
    total = sum(len(t) for t in times)
    if scenario.max_packets is not None:
        total = min(total, scenario.max_packets)
    horizon_ns = int(round(scenario.horizon * NS_PER_S))

    rec_leaf = np.empty(total, dtype=np.int32)
    rec_seq = np.empty(total, dtype=np.int64)
    rec_arr = np.empty(total, dtype=np.int64)
    rec_disp = np.empty(total, dtype=np.int64)
    rec_start = np.empty((total, m), dtype=np.int64)
    rec_fin = np.empty((total, m), dtype=np.int64)
    rec_size = np.empty(total, dtype=float)

    head = [0] * len(leaves)  # next packet to dispatch
    avail = [0] * len(leaves)  # packets known to have arrived
    heap = [(int(t[0]), li) for li, t in enumerate(times) if len(t)]
    heapq.heapify(heap)
    heads = _Heads(scheduler, index, head, dur_us)
    free = [0] * m
    t = 0
    n = 0
    while n < total:
        while heap and heap[0][0] <= t:
            _, li = heapq.heappop(heap)
            avail[li] = int(np.searchsorted(times[li], t, side="right"))
            scheduler.activate(leaves[li])
        if not scheduler.backlogged:
            if not heap:
                break
            t = heap[0][0]
            if t >= horizon_ns:
                break
            continue
        if t >= horizon_ns:
            break
        leaf = scheduler.dispatch(heads)
        li = index[leaf]
        k = head[li]
        head[li] = k + 1
        d = durs[li][k]
        rec_leaf[n] = li
        rec_seq[n] = k
        rec_arr[n] = times[li][k]
        rec_disp[n] = t
        rec_size[n] = sizes[li][k]
        prev = t
        for r in range(m):
            s = prev if prev > free[r] else free[r]
            f = s + int(d[r])
            rec_start[n, r] = s
            rec_fin[n, r] = f
            free[r] = f
            prev = f
        n += 1
        if head[li] == avail[li]:
            avail[li] = int(np.searchsorted(times[li], t, side="right"))
            if head[li] == avail[li]:
                scheduler.deactivate(leaf)
                if head[li] < len(times[li]):
                    heapq.heappush(heap, (int(times[li][head[li]]), li))
        t = free[0]

    pending = {}
    for li, leaf in enumerate(leaves):
        if head[li] < len(times[li]) and times[li][head[li]] < horizon_ns:
            pending[leaf] = int(times[li][head[li]])
    return Trace(
        leaves=tuple(leaves),
        leaf=rec_leaf[:n],
        seq=rec_seq[:n],
        arrival=rec_arr[:n],
        dispatch=rec_disp[:n],
        start=rec_start[:n],
        finish=rec_fin[:n],
        size=rec_size[:n],
        horizon_ns=horizon_ns,
        scheduler=getattr(scheduler, "kind", scenario.scheduler),
        capacity_fractions=tuple(r.capacity_fraction for r in scenario.resources),
        resource_names=tuple(r.name for r in scenario.resources),
        pending_since=pending,
    )
