"""Scenario description, cost models and JSON scenario parsing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from ..hierarchy import HierarchyError, HierarchySpec, parse_hierarchy, validate_and_normalize
from ..profiles import PacketProfile
from ..schedulers import COLLAPSED, SCHEDULER_KINDS


class ScenarioError(ValueError):
    pass


# CPU processing time in microseconds = coef * bytes + intercept
CPU_COST_MODELS: dict[str, tuple[float, float]] = {
    "basic-forwarding": (0.00286, 6.2),
    "statistical-monitoring": (0.0008, 12.1),
    "ipsec": (0.015, 84.5),
}
MODULE_ALIASES = {
    "basic": "basic-forwarding",
    "forwarding": "basic-forwarding",
    "monitoring": "statistical-monitoring",
    "stats": "statistical-monitoring",
}
RESOURCE_KINDS = ("cpu", "bandwidth", "custom")
ARRIVAL_KINDS = ("poisson", "constant", "backlog")
SIZE_KINDS = ("fixed", "uniform")


def module_kind(name: str) -> str:
    key = MODULE_ALIASES.get(name, name)
    if key not in CPU_COST_MODELS:
        raise ScenarioError(f"unknown middlebox module {name!r}; expected one of {sorted(CPU_COST_MODELS)}")
    return key


@dataclass(frozen=True)
class ResourceSpec:
    name: str = "cpu"
    capacity_fraction: float = 1.0
    link_rate: float | None = None  # bits/s, bandwidth only

    def __post_init__(self) -> None:
        if self.name not in RESOURCE_KINDS:
            raise ScenarioError(f"unknown resource {self.name!r}")
        if not 0 < self.capacity_fraction <= 1:
            raise ScenarioError(f"capacity_fraction must be in (0, 1], got {self.capacity_fraction}")
        if self.name == "bandwidth" and (self.link_rate is None or self.link_rate <= 0):
            raise ScenarioError("bandwidth resource needs a positive link_rate")

    def service_time_us(self, module: str, size_bytes: float) -> float:
        if self.name == "cpu":
            coef, intercept = CPU_COST_MODELS[module_kind(module)]
            base = coef * size_bytes + intercept
        elif self.name == "bandwidth":
            base = size_bytes * 8 / self.link_rate * 1e6
        else:
            raise ScenarioError("custom resources have no cost model; give flows an explicit profile")
        return base / self.capacity_fraction


def cost_profile(module: str, size_bytes: float, resources: Sequence[ResourceSpec]) -> PacketProfile:
    """Per-resource processing times (microseconds) of one packet."""
    if size_bytes <= 0:
        raise ScenarioError(f"packet size must be positive, got {size_bytes}")
    module_kind(module)
    return PacketProfile(tuple(r.service_time_us(module, size_bytes) for r in resources))


@dataclass(frozen=True)
class FlowSource:
    leaf: str
    start: float = 0.0
    stop: float | None = None  # None: until the horizon
    arrival: str = "poisson"
    rate: float = 1.0  # packets/s
    size: str = "fixed"
    size_bytes: float = 1300.0
    size_lo: float = 200.0
    size_hi: float = 1400.0
    module: str = "basic-forwarding"
    profile: tuple[float, ...] | None = None  # explicit microseconds, overrides the cost model
    count: int = 0  # packets released at ``start`` when arrival == "backlog"

    def __post_init__(self) -> None:
        if self.arrival not in ARRIVAL_KINDS:
            raise ScenarioError(f"flow {self.leaf!r}: unknown arrival process {self.arrival!r}")
        if self.size not in SIZE_KINDS:
            raise ScenarioError(f"flow {self.leaf!r}: unknown size distribution {self.size!r}")
        if self.start < 0:
            raise ScenarioError(f"flow {self.leaf!r}: start must be >= 0")
        if self.stop is not None and self.stop <= self.start:
            raise ScenarioError(f"flow {self.leaf!r}: start must precede stop")
        if self.arrival == "backlog":
            if self.count <= 0:
                raise ScenarioError(f"flow {self.leaf!r}: backlog needs a positive count")
        elif self.rate <= 0:
            raise ScenarioError(f"flow {self.leaf!r}: rate must be positive")
        if self.size == "uniform" and self.size_lo > self.size_hi:
            raise ScenarioError(f"flow {self.leaf!r}: size_lo > size_hi")
        if self.size == "fixed" and self.size_bytes <= 0:
            raise ScenarioError(f"flow {self.leaf!r}: size must be positive")
        if self.profile is None:
            module_kind(self.module)

    @property
    def mean_size(self) -> float:
        return self.size_bytes if self.size == "fixed" else (self.size_lo + self.size_hi) / 2

    def packet_profile(self, size_bytes: float, resources: Sequence[ResourceSpec]) -> PacketProfile:
        if self.profile is not None:
            return PacketProfile(tuple(float(x) for x in self.profile))
        return cost_profile(self.module, size_bytes, resources)

    def nominal_profile(self, resources: Sequence[ResourceSpec]) -> PacketProfile:
        """Profile of a mean-sized packet (exact, since costs are affine in size)."""
        return self.packet_profile(self.mean_size, resources)


@dataclass(frozen=True)
class Scenario:
    hierarchy: HierarchySpec
    flows: tuple[FlowSource, ...]
    resources: tuple[ResourceSpec, ...] = (ResourceSpec("cpu"),)
    scheduler: str = COLLAPSED
    horizon: float = 1.0
    seed: int = 0
    share_window: float = 0.1
    reactivation: str = "clamp"
    max_packets: int | None = None  # stop after this many dispatches
    name: str = ""
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        self.validate()

    @property
    def m(self) -> int:
        return len(self.resources)

    def validate(self) -> None:
        if not self.horizon > 0:
            raise ScenarioError("horizon must be positive")
        if not self.share_window > 0:
            raise ScenarioError("share_window must be positive")
        if self.scheduler not in SCHEDULER_KINDS:
            raise ScenarioError(f"unknown scheduler {self.scheduler!r}; expected one of {SCHEDULER_KINDS}")
        if not self.flows:
            raise ScenarioError("scenario has no flows")
        if not self.resources:
            raise ScenarioError("scenario has no resources")
        if not 0 <= self.seed < 2**64:
            raise ScenarioError("seed must be an unsigned 64-bit integer")
        leaves = set(self.hierarchy.leaves)
        for f in self.flows:
            if f.leaf not in leaves:
                raise ScenarioError(f"flow targets {f.leaf!r}, which is not a leaf of the hierarchy")
            if f.start >= self.horizon:
                raise ScenarioError(f"flow {f.leaf!r}: start is not before the horizon")
            if f.stop is not None and f.stop > self.horizon:
                raise ScenarioError(f"flow {f.leaf!r}: stop is beyond the horizon")
            if f.profile is not None:
                if len(f.profile) != self.m:
                    raise ScenarioError(
                        f"flow {f.leaf!r}: profile has {len(f.profile)} entries for {self.m} resources"
                    )
                PacketProfile(tuple(float(x) for x in f.profile))
            elif any(r.name == "custom" for r in self.resources):
                raise ScenarioError(f"flow {f.leaf!r}: custom resources need an explicit profile")

    def nominal_profiles(self) -> dict[str, PacketProfile]:
        """One representative profile per leaf (first flow on the leaf wins);
        leaves without traffic get an all-ones profile."""
        out: dict[str, PacketProfile] = {}
        for f in self.flows:
            out.setdefault(f.leaf, f.nominal_profile(self.resources))
        for leaf in self.hierarchy.leaves:
            out.setdefault(leaf, PacketProfile((1.0,) * self.m))
        return out

    def replace(self, **changes) -> Scenario:
        from dataclasses import replace

        return replace(self, **changes)

    def to_document(self) -> dict:
        return {
            "name": self.name,
            "hierarchy": self.hierarchy.to_document(),
            "flows": [_flow_doc(f) for f in self.flows],
            "resources": [
                {k: v for k, v in (("name", r.name), ("capacity_fraction", r.capacity_fraction), ("link_rate", r.link_rate)) if v is not None}
                for r in self.resources
            ],
            "scheduler": self.scheduler,
            "horizon_s": self.horizon,
            "seed": self.seed,
            "share_window_s": self.share_window,
            "reactivation": self.reactivation,
            "max_packets": self.max_packets,
        }


def _flow_doc(f: FlowSource) -> dict:
    doc: dict[str, Any] = {"leaf": f.leaf, "start": f.start, "arrival": f.arrival}
    if f.stop is not None:
        doc["stop"] = f.stop
    if f.arrival == "backlog":
        doc["count"] = f.count
    else:
        doc["rate"] = f.rate
    if f.size == "fixed":
        doc["size"] = {"kind": "fixed", "bytes": f.size_bytes}
    else:
        doc["size"] = {"kind": "uniform", "lo": f.size_lo, "hi": f.size_hi}
    if f.profile is not None:
        doc["profile"] = list(f.profile)
    else:
        doc["module"] = f.module
    return doc


_FLOW_KEYS = {"leaf", "start", "stop", "arrival", "rate", "size", "module", "profile", "count"}
_SCENARIO_KEYS = {
    "name", "hierarchy", "flows", "resources", "scheduler", "horizon_s", "seed",
    "share_window_s", "reactivation", "max_packets",
}


def _parse_flow(doc: Any) -> FlowSource:
    if not isinstance(doc, dict):
        raise ScenarioError("each flow must be an object")
    unknown = set(doc) - _FLOW_KEYS
    if unknown:
        raise ScenarioError(f"unknown flow fields {sorted(unknown)}")
    if "leaf" not in doc:
        raise ScenarioError("flow is missing 'leaf'")
    kw: dict[str, Any] = {"leaf": str(doc["leaf"])}
    for key in ("start", "stop", "rate"):
        if key in doc and doc[key] is not None:
            kw[key] = float(doc[key])
    if "arrival" in doc:
        kw["arrival"] = str(doc["arrival"])
    if "count" in doc:
        kw["count"] = int(doc["count"])
    size = doc.get("size")
    if isinstance(size, (int, float)):
        kw.update(size="fixed", size_bytes=float(size))
    elif isinstance(size, dict):
        kind = size.get("kind", "fixed")
        if kind == "fixed":
            kw.update(size="fixed", size_bytes=float(size.get("bytes", 1300)))
        elif kind == "uniform":
            kw.update(size="uniform", size_lo=float(size["lo"]), size_hi=float(size["hi"]))
        else:
            raise ScenarioError(f"unknown size distribution {kind!r}")
    elif size is not None:
        raise ScenarioError("size must be a number or an object")
    if "module" in doc:
        kw["module"] = str(doc["module"])
    if doc.get("profile") is not None:
        kw["profile"] = tuple(float(x) for x in doc["profile"])
    return FlowSource(**kw)


def _parse_resource(doc: Any) -> ResourceSpec:
    if isinstance(doc, str):
        return ResourceSpec(doc)
    if not isinstance(doc, dict):
        raise ScenarioError("each resource must be a name or an object")
    link = doc.get("link_rate")
    return ResourceSpec(
        str(doc.get("name", "custom")),
        float(doc.get("capacity_fraction", 1.0)),
        None if link is None else float(link),
    )


def parse_scenario(doc: str | dict, *, weight_mode: str = "renormalize") -> Scenario:
    """Build a :class:`Scenario` from a JSON document or an already-parsed dict."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    unknown = set(doc) - _SCENARIO_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario fields {sorted(unknown)}")
    for key in ("hierarchy", "flows"):
        if key not in doc:
            raise ScenarioError(f"scenario is missing {key!r}")
    try:
        spec = validate_and_normalize(parse_hierarchy(doc["hierarchy"]), weight_mode)
    except HierarchyError as exc:
        raise ScenarioError(f"hierarchy: {exc}") from None
    if not isinstance(doc["flows"], list):
        raise ScenarioError("flows must be a list")
    flows = tuple(_parse_flow(f) for f in doc["flows"])
    resources = tuple(_parse_resource(r) for r in doc.get("resources", ["cpu"]))
    try:
        return Scenario(
            hierarchy=spec,
            flows=flows,
            resources=resources,
            scheduler=str(doc.get("scheduler", COLLAPSED)),
            horizon=float(doc.get("horizon_s", 1.0)),
            seed=int(doc.get("seed", 0)),
            share_window=float(doc.get("share_window_s", 0.1)),
            reactivation=str(doc.get("reactivation", "clamp")),
            max_packets=None if doc.get("max_packets") is None else int(doc["max_packets"]),
            name=str(doc.get("name", "")),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc)) from None


def load_scenario(path: str | Path, **kw) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from None
    return parse_scenario(text, **kw)
