"""Randomized property suite over seeded random hierarchies.

Three families of checks:

``bounds``
    the dove-tailing delay bound of every leaf does not exceed the collapsed one.
``share``
    in a fully backlogged run every node gets at least its weight fraction of
    one of its parent's resources, within one packet.
``strategy``
    a leaf or subtree declaring inflated demands never gets more packets
    through than when honest, within one packet.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .analysis import share_guarantee_report, strategyproofness_probe
from .bounds import bound_report
from .hierarchy import HierarchySpec
from .randtrees import random_profiles, random_tree
from .schedulers import HDRFQ_KINDS
from .sim.engine import run
from .sim.scenario import FlowSource, ResourceSpec, Scenario

CHECKS = ("bounds", "share", "strategy")
BOUND_ATOL_US = 1e-9


def backlogged_scenario(
    spec: HierarchySpec,
    profiles: dict,
    kind: str,
    dispatches: int = 2000,
    seed: int = 0,
) -> Scenario:
    """Every leaf permanently backlogged; the horizon fits about ``dispatches``
    packets through resource 1."""
    m = len(next(iter(profiles.values())))
    mean_r1 = float(np.mean([p[0] for p in profiles.values()]))
    horizon = dispatches * mean_r1 * 1e-6
    flows = tuple(
        FlowSource(leaf, arrival="backlog", count=dispatches + 1, profile=tuple(profiles[leaf]))
        for leaf in spec.leaves
    )
    return Scenario(
        spec, flows, tuple(ResourceSpec("custom") for _ in range(m)), kind, horizon, seed, horizon / 8,
        name="backlogged",
    )


def random_inflation(rng: np.random.Generator, spec: HierarchySpec, profiles: dict):
    """Pick a leaf or a whole subtree and inflate its profiles componentwise."""
    internal = [n for n in spec.internal_nodes if n != spec.root]
    if internal and rng.random() < 0.5:
        target = internal[int(rng.integers(len(internal)))]
        leaves = spec.topology.leaves_under(target)
    else:
        target = spec.leaves[int(rng.integers(len(spec.leaves)))]
        leaves = (target,)
    inflated = {}
    for leaf in leaves:
        p = np.asarray(profiles[leaf], dtype=float)
        factors = rng.uniform(1.0, 2.0, size=len(p))
        factors[int(rng.integers(len(p)))] = rng.uniform(1.05, 2.0)
        inflated[leaf] = tuple(float(x) for x in np.round(p * factors, 3))
    return target, tuple(leaves), inflated


@dataclass
class Failure:
    check: str
    tree_index: int
    profile_set: int
    scheduler: str | None
    detail: dict
    tree: dict
    profiles: dict

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "tree_index": self.tree_index,
            "profile_set": self.profile_set,
            "scheduler": self.scheduler,
            "detail": self.detail,
            "tree": self.tree,
            "profiles": self.profiles,
        }


@dataclass
class SuiteReport:
    trees: int
    profile_sets: int
    seed: int
    schedulers: tuple[str, ...]
    checks: tuple[str, ...]
    counts: dict = field(default_factory=dict)
    failures: list[Failure] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "trees": self.trees,
            "profile_sets": self.profile_sets,
            "seed": self.seed,
            "schedulers": list(self.schedulers),
            "checks": list(self.checks),
            "counts": self.counts,
            "failures": [f.to_dict() for f in self.failures],
        }


def instances(seed: int, n_trees: int, n_profile_sets: int = 1):
    """Yield ``(tree_index, profile_set, spec, profiles, rng)`` reproducibly."""
    rng = np.random.default_rng(seed)
    for t in range(n_trees):
        spec = random_tree(rng)
        for s in range(n_profile_sets):
            profiles = random_profiles(rng, spec)
            yield t, s, spec, profiles, np.random.default_rng([seed, t, s])


def run_property_suite(
    n_trees: int = 100,
    n_profile_sets: int = 1,
    seed: int = 0,
    schedulers: Iterable[str] = HDRFQ_KINDS,
    checks: Iterable[str] = CHECKS,
    dispatches: int = 1500,
) -> SuiteReport:
    schedulers = tuple(schedulers)
    checks = tuple(checks)
    unknown = set(checks) - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}")
    report = SuiteReport(n_trees, n_profile_sets, seed, schedulers, checks, {c: 0 for c in checks})
    for t, s, spec, profiles, rng in instances(seed, n_trees, n_profile_sets):
        doc = spec.to_document()
        prof_doc = {k: list(v) for k, v in profiles.items()}

        def fail(check, kind, detail):
            report.failures.append(Failure(check, t, s, kind, detail, doc, prof_doc))

        if "bounds" in checks:
            for leaf in spec.leaves:
                r = bound_report(spec, profiles, leaf)
                report.counts["bounds"] += 1
                if r.dovetail_bound > r.collapsed_bound + BOUND_ATOL_US:
                    fail("bounds", None, {
                        "leaf": leaf,
                        "dovetail_bound": r.dovetail_bound,
                        "collapsed_bound": r.collapsed_bound,
                        "terms": [list(x) for x in r.per_term_breakdown],
                    })
        for kind in schedulers:
            if "share" in checks:
                sc = backlogged_scenario(spec, profiles, kind, dispatches)
                trace = run(sc)
                window = (sc.horizon / 4, sc.horizon)
                for rep in share_guarantee_report(trace, spec, window):
                    report.counts["share"] += 1
                    if rep.flagged:
                        fail("share", kind, {
                            "node": rep.node,
                            "window_s": list(rep.window),
                            "measured": rep.measured_dominant_share,
                            "guaranteed": rep.guaranteed_share,
                            "deficit_us": rep.deficit,
                            "slack_us": rep.violation_slack,
                        })
            if "strategy" in checks:
                target, leaves, inflated = random_inflation(rng, spec, profiles)
                sc = backlogged_scenario(spec, profiles, kind, dispatches)
                verdict = strategyproofness_probe(sc, leaves, inflated)
                report.counts["strategy"] += 1
                if not verdict.passed:
                    fail("strategy", kind, {
                        "target": target,
                        "inflated": {k: list(v) for k, v in inflated.items()},
                        "max_excess_packets": verdict.max_excess,
                        "honest_counts": verdict.honest_counts.tolist(),
                        "inflated_counts": verdict.inflated_counts.tolist(),
                    })
    return report
