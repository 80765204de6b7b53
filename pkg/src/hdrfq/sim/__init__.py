"""Packet-level simulation of a multi-resource middlebox."""

from .engine import Trace, run
from .metrics import BusyIndex, DelayStats, WindowedShares, busy_by_node, delay_stats, windowed_shares
from .scenario import (
    CPU_COST_MODELS,
    FlowSource,
    ResourceSpec,
    Scenario,
    ScenarioError,
    cost_profile,
    load_scenario,
    parse_scenario,
)
from .traffic import Arrivals, generate_arrivals

__all__ = [
    "Arrivals",
    "BusyIndex",
    "CPU_COST_MODELS",
    "DelayStats",
    "FlowSource",
    "ResourceSpec",
    "Scenario",
    "ScenarioError",
    "Trace",
    "WindowedShares",
    "busy_by_node",
    "cost_profile",
    "delay_stats",
    "generate_arrivals",
    "load_scenario",
    "parse_scenario",
    "run",
    "windowed_shares",
]
