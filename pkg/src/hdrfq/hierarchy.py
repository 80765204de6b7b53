"""Weighted scheduling trees: parsing, validation and topology queries.

A hierarchy document is JSON of the form::

    {"id": "R", "weight": 1, "children": [
        {"id": "f1", "weight": 0.5},
        {"id": "f2", "weight": 0.5, "children": [...]}]}

A node without ``children`` (or with an empty list) is a leaf.  Omitted ids
default to the node's path ("2.1" is the first child of the root's second
child).  Child order is significant: it is the tie-break order used by every
scheduler in the package.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable, Iterator

MAX_DEPTH = 16
WEIGHT_RTOL = 1e-9


class HierarchyError(ValueError):
    """Raised for malformed or inconsistent hierarchy documents."""


@dataclass(frozen=True)
class Node:
    id: str
    weight: float
    children: tuple[str, ...] = ()
    parent: str | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def kind(self) -> str:
        return "leaf" if self.is_leaf else "internal"


@dataclass(frozen=True)
class HierarchySpec:
    nodes: dict[str, Node]
    root: str

    def __getitem__(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise HierarchyError(f"unknown node {node_id!r}") from None

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.nodes

    def __iter__(self) -> Iterator[str]:
        return iter(self.preorder())

    def weight(self, node_id: str) -> float:
        return self[node_id].weight

    def preorder(self) -> list[str]:
        out: list[str] = []
        stack = [self.root]
        while stack:
            nid = stack.pop()
            out.append(nid)
            stack.extend(reversed(self.nodes[nid].children))
        return out

    def postorder(self) -> list[str]:
        return self.preorder()[::-1]

    @cached_property
    def leaves(self) -> tuple[str, ...]:
        return tuple(n for n in self.preorder() if self.nodes[n].is_leaf)

    @cached_property
    def internal_nodes(self) -> tuple[str, ...]:
        return tuple(n for n in self.preorder() if not self.nodes[n].is_leaf)

    @cached_property
    def topology(self) -> Topology:
        return Topology(self)

    def to_document(self) -> dict[str, Any]:
        def build(nid: str) -> dict[str, Any]:
            node = self.nodes[nid]
            doc: dict[str, Any] = {"id": nid, "weight": node.weight}
            if node.children:
                doc["children"] = [build(c) for c in node.children]
            return doc

        return build(self.root)

    def dumps(self, **kwargs: Any) -> str:
        return json.dumps(self.to_document(), **kwargs)


def parse_hierarchy(document: str | bytes | dict[str, Any]) -> HierarchySpec:
    """Build an unvalidated :class:`HierarchySpec` from a JSON document.

    Only structural errors are reported here (bad types, duplicate ids,
    non-positive weights, excessive depth).  Weight-sum consistency is the job
    of :func:`validate_and_normalize`.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise HierarchyError(f"malformed hierarchy document: {exc}") from exc
    if not isinstance(document, dict):
        raise HierarchyError("hierarchy document must be a JSON object")

    nodes: dict[str, Node] = {}

    def visit(doc: Any, path: str, parent: str | None, depth: int) -> str:
        where = path or "<root>"
        if not isinstance(doc, dict):
            raise HierarchyError(f"node at {where}: expected an object")
        if depth > MAX_DEPTH:
            raise HierarchyError(f"node at {where}: depth exceeds {MAX_DEPTH}")
        nid = doc.get("id", path if path else "R")
        if not isinstance(nid, str) or not nid:
            raise HierarchyError(f"node at {where}: id must be a non-empty string")
        if nid in nodes:
            raise HierarchyError(f"node at {where}: duplicate id {nid!r}")
        if "weight" in doc:
            weight = doc["weight"]
        elif parent is None:
            weight = 1.0
        else:
            raise HierarchyError(f"node {nid!r} at {where}: missing weight")
        if isinstance(weight, bool) or not isinstance(weight, (int, float)):
            raise HierarchyError(f"node {nid!r} at {where}: weight must be a number")
        if not math.isfinite(weight) or weight <= 0:
            raise HierarchyError(f"node {nid!r} at {where}: weight must be positive")
        raw_children = doc.get("children") or []
        if not isinstance(raw_children, list):
            raise HierarchyError(f"node {nid!r} at {where}: children must be a list")
        # reserve the id before recursing so descendants cannot reuse it
        nodes[nid] = Node(nid, float(weight), (), parent)
        kids = []
        for k, child in enumerate(raw_children, start=1):
            child_path = f"{path}.{k}" if path else str(k)
            kids.append(visit(child, child_path, nid, depth + 1))
        nodes[nid] = Node(nid, float(weight), tuple(kids), parent)
        return nid

    root = visit(document, "", None, 0)
    return HierarchySpec(nodes, root)


def load_hierarchy(path: str, mode: str = "renormalize") -> HierarchySpec:
    with open(path, encoding="utf-8") as fh:
        return validate_and_normalize(parse_hierarchy(fh.read()), mode)


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=WEIGHT_RTOL, abs_tol=1e-15)


def validate_and_normalize(spec: HierarchySpec, mode: str = "strict") -> HierarchySpec:
    """Check weight sums (``strict``) or rescale them (``renormalize``).

    In ``renormalize`` mode the root gets weight 1, every sibling group is
    scaled so it sums to its parent's weight, and internal weights are then
    recomputed bottom-up from their children.
    """
    if mode not in ("strict", "renormalize"):
        raise ValueError(f"unknown mode {mode!r}")
    _check_tree(spec)

    if mode == "strict":
        for nid in spec.internal_nodes:
            node = spec.nodes[nid]
            total = sum(spec.nodes[c].weight for c in node.children)
            if not _close(total, node.weight):
                raise HierarchyError(
                    f"node {nid!r}: children weights sum to {total!r}, expected {node.weight!r}"
                )
        leaf_total = sum(spec.nodes[n].weight for n in spec.leaves)
        if not _close(leaf_total, 1.0):
            raise HierarchyError(f"leaf weights sum to {leaf_total!r}, expected 1")
        return spec

    weights = {spec.root: 1.0}
    for nid in spec.preorder():
        node = spec.nodes[nid]
        if node.is_leaf:
            continue
        raw = [spec.nodes[c].weight for c in node.children]
        scale = weights[nid] / sum(raw)
        for c, w in zip(node.children, raw):
            weights[c] = w * scale
    for nid in spec.postorder():
        node = spec.nodes[nid]
        if not node.is_leaf:
            weights[nid] = math.fsum(weights[c] for c in node.children)
    nodes = {
        nid: Node(nid, weights[nid], node.children, node.parent)
        for nid, node in spec.nodes.items()
    }
    return HierarchySpec(nodes, spec.root)


def _check_tree(spec: HierarchySpec) -> None:
    if spec.root not in spec.nodes:
        raise HierarchyError(f"root {spec.root!r} is not a node")
    if spec.nodes[spec.root].parent is not None:
        raise HierarchyError("root must not have a parent")
    seen: set[str] = set()
    queue = deque([(spec.root, 0)])
    while queue:
        nid, depth = queue.popleft()
        if nid in seen:
            raise HierarchyError(f"node {nid!r} reachable twice (cycle or shared child)")
        if depth > MAX_DEPTH:
            raise HierarchyError(f"node {nid!r}: depth exceeds {MAX_DEPTH}")
        seen.add(nid)
        node = spec.nodes[nid]
        if node.weight <= 0:
            raise HierarchyError(f"node {nid!r}: weight must be positive")
        for c in node.children:
            if c not in spec.nodes:
                raise HierarchyError(f"node {nid!r}: unknown child {c!r}")
            if spec.nodes[c].parent != nid:
                raise HierarchyError(f"node {c!r}: parent link does not point at {nid!r}")
            queue.append((c, depth + 1))
    orphans = set(spec.nodes) - seen
    if orphans:
        raise HierarchyError(f"orphan nodes not reachable from root: {sorted(orphans)}")


class Topology:
    """Read-only structural queries over a validated hierarchy."""

    def __init__(self, spec: HierarchySpec):
        self.spec = spec
        self._depth: dict[str, int] = {spec.root: 0}
        for nid in spec.preorder():
            for c in spec.nodes[nid].children:
                self._depth[c] = self._depth[nid] + 1
        self._leaves_under: dict[str, tuple[str, ...]] = {}
        for nid in spec.postorder():
            node = spec.nodes[nid]
            if node.is_leaf:
                self._leaves_under[nid] = (nid,)
            else:
                self._leaves_under[nid] = tuple(
                    leaf for c in node.children for leaf in self._leaves_under[c]
                )

    def _node(self, node_id: str) -> Node:
        return self.spec[node_id]

    def parent(self, node_id: str) -> str | None:
        return self._node(node_id).parent

    def children(self, node_id: str) -> tuple[str, ...]:
        return self._node(node_id).children

    def depth(self, node_id: str) -> int:
        """Number of ancestors of ``node_id`` (the root has depth 0)."""
        self._node(node_id)
        return self._depth[node_id]

    def ancestor(self, node_id: str, h: int) -> str:
        """The ``h``-th predecessor; ``ancestor(i, 0) == i``."""
        depth = self.depth(node_id)
        if h < 0 or h > depth:
            raise HierarchyError(f"node {node_id!r} has no ancestor at distance {h} (depth {depth})")
        nid = node_id
        for _ in range(h):
            nid = self.spec.nodes[nid].parent  # type: ignore[assignment]
        return nid

    def ancestors(self, node_id: str) -> list[str]:
        """``[P^1(i), ..., P^H(i)]``, ending at the root."""
        out = []
        nid = self._node(node_id).parent
        while nid is not None:
            out.append(nid)
            nid = self.spec.nodes[nid].parent
        return out

    def siblings(self, node_id: str) -> tuple[str, ...]:
        parent = self._node(node_id).parent
        if parent is None:
            return ()
        return tuple(c for c in self.spec.nodes[parent].children if c != node_id)

    def leaves_under(self, node_id: str) -> tuple[str, ...]:
        self._node(node_id)
        return self._leaves_under[node_id]

    def leaves_under_set(self, nodes: Iterable[str]) -> tuple[str, ...]:
        return tuple(leaf for n in nodes for leaf in self.leaves_under(n))


def topology(spec: HierarchySpec) -> Topology:
    return spec.topology
