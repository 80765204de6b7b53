"""Seeded random hierarchies and profile sets for property checks."""

from __future__ import annotations

import numpy as np

from .hierarchy import HierarchySpec, parse_hierarchy, validate_and_normalize


def random_tree(
    rng: np.random.Generator,
    max_levels: int = 4,
    max_leaves: int = 12,
    max_children: int = 4,
) -> HierarchySpec:
    """A random tree whose leaves sit at most ``max_levels`` below the root."""
    budget = [int(rng.integers(2, max_leaves + 1))]

    def grow(path: str, level: int) -> dict:
        node: dict = {"id": path or "R", "weight": float(rng.uniform(0.1, 1.0))}
        if level == max_levels or budget[0] <= 1:
            return node
        if level > 0 and rng.random() < 0.45:
            return node
        n = int(rng.integers(2, max_children + 1))
        n = min(n, budget[0])
        budget[0] -= n - 1
        node["children"] = [grow(f"{path}.{k}" if path else str(k), level + 1) for k in range(1, n + 1)]
        return node

    doc = grow("", 0)
    doc["weight"] = 1.0
    return validate_and_normalize(parse_hierarchy(doc), "renormalize")


def random_profiles(
    rng: np.random.Generator,
    spec: HierarchySpec,
    m: int | None = None,
    lo: float = 0.1,
    hi: float = 1.0,
) -> dict[str, tuple[float, ...]]:
    """Strictly positive per-leaf profiles with ``m`` resources (random 1..3 if omitted)."""
    if m is None:
        m = int(rng.integers(1, 4))
    return {leaf: tuple(float(x) for x in rng.uniform(lo, hi, size=m)) for leaf in spec.leaves}


def random_instances(seed: int, n: int, **kw):
    """``n`` reproducible ``(spec, profiles)`` pairs."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        spec = random_tree(rng, **kw)
        out.append((spec, random_profiles(rng, spec)))
    return out
