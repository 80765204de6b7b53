"""Deterministic per-flow arrival streams."""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .scenario import FlowSource

NS_PER_S = 1_000_000_000


@dataclass(frozen=True)
class Arrivals:
    leaf: str
    times_ns: np.ndarray  # int64, non-decreasing
    sizes: np.ndarray  # float64 bytes

    def __len__(self) -> int:
        return len(self.times_ns)


def flow_rng(seed: int, leaf: str, index: int = 0) -> np.random.Generator:
    """Independent stream per (seed, leaf, flow index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(leaf.encode()), index]))


def generate_arrivals(source: FlowSource, seed: int, horizon: float | None = None, index: int = 0) -> Arrivals:
    """Arrival times (ns) and sizes for one flow on ``[start, stop)``."""
    rng = flow_rng(seed, source.leaf, index)
    stop = source.stop if source.stop is not None else horizon
    if stop is None and source.arrival != "backlog":
        raise ValueError(f"flow {source.leaf!r} has no stop time and no horizon was given")
    start_ns = int(round(source.start * NS_PER_S))
    if source.arrival == "backlog":
        times = np.full(source.count, start_ns, dtype=np.int64)
    elif source.arrival == "constant":
        n = int(np.ceil((stop - source.start) * source.rate - 1e-9))
        times = start_ns + np.rint(np.arange(n) * (NS_PER_S / source.rate)).astype(np.int64)
    else:
        span = stop - source.start
        expected = span * source.rate
        chunks = []
        t = 0.0
        # draw in blocks until the cumulative time passes the window
        block = max(16, int(expected + 6 * np.sqrt(expected) + 16))
        while t < span:
            gaps = rng.exponential(1.0 / source.rate, size=block)
            cum = t + np.cumsum(gaps)
            chunks.append(cum)
            t = float(cum[-1])
        offsets = np.concatenate(chunks)
        offsets = offsets[offsets < span]
        times = start_ns + np.floor(offsets * NS_PER_S).astype(np.int64)
    stop_ns = None if stop is None else int(round(stop * NS_PER_S))
    if stop_ns is not None and source.arrival != "backlog":
        times = times[times < stop_ns]
    n = len(times)
    if source.size == "fixed":
        sizes = np.full(n, float(source.size_bytes))
    else:
        sizes = rng.uniform(source.size_lo, source.size_hi, size=n)
    return Arrivals(source.leaf, times, sizes)
