"""Progressive-filling DRFQ over a single sibling group.

Each member carries a counter ``V`` = dominant-resource service divided by
its weight; the next packet always comes from the active member with the
smallest counter, ties going to the member declared first.

Two accounting variants are supported:

``memoryless``
    every charge adds the packet's own dominant time, ``V += mu / phi``.
``dovetail``
    the member's per-resource usage is accumulated and ``V`` is the largest
    accumulated component divided by the weight, so complementary packets
    (``<2,1>`` then ``<1,2>``) cost the same as one ``<3,3>`` packet.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

MEMORYLESS = "memoryless"
DOVETAIL = "dovetail"
VARIANTS = (MEMORYLESS, DOVETAIL)

# reactivation policies
CLAMP = "clamp"
RESET = "reset"

COUNTER_ATOL = 1e-9
COUNTER_RTOL = 1e-12


class SchedulerStateError(RuntimeError):
    pass


@dataclass
class _Member:
    name: str
    weight: float
    offset: float = 0.0
    usage: list[float] = field(default_factory=list)
    service: float = 0.0  # memoryless: accumulated mu / phi
    registered_mu: float | None = None


class GroupScheduler:
    """Progressive filling over one ordered group of weighted members."""

    def __init__(
        self,
        members: Iterable[tuple[str, float]],
        variant: str = MEMORYLESS,
        *,
        reactivation: str = CLAMP,
        strict: bool = False,
    ):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        if reactivation not in (CLAMP, RESET):
            raise ValueError(f"unknown reactivation policy {reactivation!r}")
        self.variant = variant
        self.reactivation = reactivation
        self.strict = strict
        self._members: dict[str, _Member] = {}
        self._order: list[str] = []
        for name, weight in members:
            self.add_member(name, weight)
        self._active: set[str] = set()
        # monotone floor: the smallest active counter seen at the last change
        # of the active set
        self._vtime = 0.0

    # -- membership -------------------------------------------------------

    def add_member(self, name: str, weight: float) -> None:
        if name in self._members:
            raise SchedulerStateError(f"duplicate member {name!r}")
        if weight <= 0:
            raise ValueError(f"member {name!r}: weight must be positive")
        self._members[name] = _Member(name, float(weight))
        self._order.append(name)

    def set_weight(self, name: str, weight: float) -> None:
        """Change a member's weight; its counter value is kept as is."""
        if weight <= 0:
            raise ValueError(f"member {name!r}: weight must be positive")
        mem = self._get(name)
        if self.variant == DOVETAIL:
            # fold the current counter into the offset so V is preserved
            mem.offset = self._value(mem)
            mem.usage = []
        mem.weight = float(weight)

    @property
    def members(self) -> list[str]:
        return list(self._order)

    @property
    def active(self) -> frozenset[str]:
        return frozenset(self._active)

    def weight(self, name: str) -> float:
        return self._get(name).weight

    def is_active(self, name: str) -> bool:
        return name in self._active

    def _get(self, name: str) -> _Member:
        try:
            return self._members[name]
        except KeyError:
            raise SchedulerStateError(f"unknown member {name!r}") from None

    # -- counters ----------------------------------------------------------

    def _value(self, mem: _Member) -> float:
        if self.variant == MEMORYLESS:
            return mem.offset + mem.service
        if not mem.usage:
            return mem.offset
        return mem.offset + max(mem.usage) / mem.weight

    def counter(self, name: str) -> float:
        return self._value(self._get(name))

    def counters(self) -> dict[str, float]:
        return {n: self._value(self._members[n]) for n in self._order}

    def usage(self, name: str) -> tuple[float, ...]:
        return tuple(self._get(name).usage)

    def min_active_counter(self, exclude: str | None = None) -> float | None:
        vals = [self._value(self._members[n]) for n in self._active if n != exclude]
        return min(vals) if vals else None

    # -- operations ----------------------------------------------------------

    def next_member(self) -> str:
        """Active member with the least counter (declaration order breaks ties)."""
        if not self._active:
            raise SchedulerStateError("no active members")
        best_name = None
        best = 0.0
        for name in self._order:
            if name not in self._active:
                continue
            v = self._value(self._members[name])
            if best_name is None or v < best - (COUNTER_ATOL + COUNTER_RTOL * abs(best)):
                best_name, best = name, v
        assert best_name is not None
        return best_name

    def charge(self, name: str, demand: float | Sequence[float]) -> None:
        """Account one dispatched packet to ``name``.

        ``demand`` is either the packet's dominant time or its full profile.
        The dove-tailing variant needs the full profile to be meaningful.
        """
        mem = self._get(name)
        if name not in self._active:
            raise SchedulerStateError(f"cannot charge inactive member {name!r}")
        vec = (float(demand),) if isinstance(demand, (int, float)) else tuple(map(float, demand))
        mu = max(vec)
        if self.variant == MEMORYLESS:
            if self.strict:
                if mem.registered_mu is None:
                    mem.registered_mu = mu
                elif abs(mem.registered_mu - mu) > COUNTER_ATOL:
                    raise SchedulerStateError(
                        f"memoryless member {name!r} has fixed dominant time "
                        f"{mem.registered_mu}, got {mu}"
                    )
            mem.service += mu / mem.weight
            return
        if not mem.usage:
            mem.usage = [0.0] * len(vec)
        elif len(mem.usage) != len(vec):
            raise SchedulerStateError(f"member {name!r}: resource count changed")
        for r, d in enumerate(vec):
            mem.usage[r] += d

    def set_active(self, name: str, active: bool) -> None:
        """Activate (with the anti-starvation clamp) or deactivate a member.

        The group keeps a non-decreasing floor, the least active counter as of
        the last membership change.  On activation a counter below the floor
        is raised to it, so a returning member neither monopolizes the group
        nor is penalized for having idled.  With ``reactivation="reset"`` the
        counter is set to the floor unconditionally.  Deactivation keeps the
        counter.
        """
        mem = self._get(name)
        if active == (name in self._active):
            return
        current = self.min_active_counter()
        if current is not None and current > self._vtime:
            self._vtime = current
        if not active:
            self._active.discard(name)
            return
        if self.reactivation == RESET or self._value(mem) < self._vtime:
            mem.offset = self._vtime
            mem.service = 0.0
            mem.usage = []
        self._active.add(name)

    @property
    def virtual_time(self) -> float:
        current = self.min_active_counter()
        return self._vtime if current is None else max(self._vtime, current)
