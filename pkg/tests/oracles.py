"""Independent reference computations used to cross-check the package.

These deliberately avoid the package's own helpers (topology views,
effective weights, virtual profiles) and work straight off the JSON-like
document or plain dicts, so a bug in one implementation does not hide in
the other.
"""

from __future__ import annotations

from collections import deque
from fractions import Fraction


def tree_tables(spec):
    """(parent, children, weight) dicts rebuilt from the serialized document."""
    doc = spec.to_document()
    parent, children, weight = {}, {}, {}
    stack = [(doc, None)]
    while stack:
        node, par = stack.pop()
        nid = node["id"]
        parent[nid] = par
        weight[nid] = node["weight"]
        children[nid] = [c["id"] for c in node.get("children", [])]
        for c in node.get("children", []):
            stack.append((c, nid))
    return parent, children, weight


def bfs_leaves(spec, node):
    _, children, _ = tree_tables(spec)
    out, queue = [], deque([node])
    while queue:
        n = queue.popleft()
        if children[n]:
            queue.extend(children[n])
        else:
            out.append(n)
    return set(out)


def symbolic_virtual_profiles(spec, profiles):
    """Virtual profiles with every leaf active, by recursive expansion."""
    _, children, weight = tree_tables(spec)
    memo = {}

    def prof(n):
        if n in memo:
            return memo[n]
        if not children[n]:
            p = [float(x) for x in profiles[n]]
        else:
            p = None
            for c in children[n]:
                cp = prof(c)
                mu = max(cp)
                term = [weight[c] * x / mu for x in cp]
                p = term if p is None else [a + b for a, b in zip(p, term)]
        memo[n] = p
        return p

    for n in children:
        prof(n)
    return memo


def ancestor_walk_flat_weight(spec, profiles, leaf):
    """phi' of ``leaf`` by walking parents explicitly."""
    parent, _, weight = tree_tables(spec)
    vp = symbolic_virtual_profiles(spec, profiles)
    w = weight[leaf]
    a = parent[leaf]
    while parent[a] is not None:
        w *= weight[a] / max(vp[a])
        a = parent[a]
    return w


def enumerated_collapsed_bound(spec, profiles, leaf):
    others = [l for l in bfs_leaves(spec, spec.root) if l != leaf]
    m = len(profiles[leaf])
    return max(sum(profiles[j][r] for j in others) for r in range(m))


def fluid_dispatch_rates(spec, profiles):
    """Packets per unit root service: phi'_i / mu_i, renormalized to sum 1."""
    leaves = sorted(bfs_leaves(spec, spec.root))
    raw = {l: ancestor_walk_flat_weight(spec, profiles, l) / max(profiles[l]) for l in leaves}
    tot = sum(raw.values())
    return {l: v / tot for l, v in raw.items()}


def exact_period_shares(order, profiles, group, m):
    """Per-resource share of ``group`` over a dispatch sequence, as fractions."""
    num = [Fraction(0)] * m
    den = [Fraction(0)] * m
    for leaf in order:
        for r in range(m):
            x = Fraction(profiles[leaf][r]).limit_denominator(10**9)
            den[r] += x
            if leaf in group:
                num[r] += x
    return [n / d for n, d in zip(num, den)]
