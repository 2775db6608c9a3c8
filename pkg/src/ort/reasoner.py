"""Reverse label reasoning over the neighbor label dictionary.

Paths are grown backwards from the aim labels, cut after the last condition
label they contain, and finally flipped so they read condition -> aim.

Depth is counted in labels: ``max_pop`` is the largest number of labels a
root-to-node path may hold below the virtual root.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import EmptyPathSetError, UnknownLabelError
from .ontology import NeighborLabelDictionary

logger = logging.getLogger(__name__)

CONSTRUCTION = "construction"
POST_HOC = "post_hoc"
CYCLE_ORDERS = (CONSTRUCTION, POST_HOC)


@dataclass
class LabelNode:
    label: str
    children: list["LabelNode"] = field(default_factory=list)


@dataclass
class ReverseTree:
    """Children of the virtual root are the aim labels."""

    roots: list[LabelNode]
    max_pop: int

    def node_count(self) -> int:
        n, stack = 0, list(self.roots)
        while stack:
            node = stack.pop()
            n += 1
            stack.extend(node.children)
        return n

    def render(self) -> str:
        lines = ["(root)"]

        def walk(node: LabelNode, indent: int) -> None:
            lines.append("  " * indent + node.label)
            for child in node.children:
                walk(child, indent + 1)

        for node in self.roots:
            walk(node, 1)
        return "\n".join(lines)


@dataclass(frozen=True)
class LabelPath:
    labels: tuple[str, ...]
    aim: str | None = None

    def render(self) -> str:
        return " -> ".join(self.labels)

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class QueryIntent:
    """Recognized conditions and aims as ``(entity, label)`` pairs."""

    conditions: tuple[tuple[str, str], ...]
    aims: tuple[tuple[str, str], ...]

    @property
    def condition_labels(self) -> list[str]:
        return list(dict.fromkeys(label for _, label in self.conditions))

    @property
    def aim_labels(self) -> list[str]:
        return list(dict.fromkeys(label for _, label in self.aims))

    @property
    def condition_entities(self) -> list[str]:
        return list(dict.fromkeys(entity for entity, _ in self.conditions))


def _check_labels(labels: Iterable[str], dictionary: NeighborLabelDictionary) -> None:
    missing = [label for label in labels if label not in dictionary]
    if missing:
        raise UnknownLabelError(missing)


def _check_max_pop(max_pop: int) -> None:
    if max_pop < 1:
        raise ValueError(f"max_pop must be >= 1, got {max_pop}")


def build_reverse_tree(
    aim_labels: Iterable[str],
    dictionary: NeighborLabelDictionary,
    max_pop: int,
    *,
    simple: bool = True,
) -> ReverseTree:
    """Materialize the reverse tree rooted at a virtual node over ``aim_labels``.

    With ``simple`` a child is never expanded if its label already sits on the
    path from the root. The tree grows exponentially with ``max_pop``; use
    :func:`reverse_reason` for the pruned search on large ontologies.
    """
    _check_max_pop(max_pop)
    aims = sorted(set(aim_labels))
    if not aims:
        raise ValueError("aim_labels is empty")
    _check_labels(aims, dictionary)

    def expand(label: str, depth: int, on_path: frozenset) -> LabelNode:
        node = LabelNode(label)
        if depth < max_pop:
            for nb in dictionary.sorted_neighbors(label):
                if simple and nb in on_path:
                    continue
                node.children.append(expand(nb, depth + 1, on_path | {nb}))
        return node

    return ReverseTree([expand(a, 1, frozenset((a,))) for a in aims], max_pop)


def dfs_paths(tree: ReverseTree) -> list[list[str]]:
    """All root-to-leaf label sequences, virtual root excluded, in DFS order."""
    out: list[list[str]] = []

    def walk(node: LabelNode, path: list[str]) -> None:
        path.append(node.label)
        if not node.children:
            out.append(list(path))
        for child in node.children:
            walk(child, path)
        path.pop()

    for node in tree.roots:
        walk(node, [])
    return out


def prune_by_conditions(tree_or_paths, condition_labels: Iterable[str]) -> list[tuple[str, ...]]:
    """Keep each root-to-leaf path up to and including its last condition label.

    Accepts a :class:`ReverseTree` (walked recursively, each branch on its own
    copy of the path) or an iterable of label sequences. Paths without any
    condition label are dropped; the result is deduplicated in first-seen order.
    """
    conds = frozenset(condition_labels)
    if not conds:
        raise ValueError("condition_labels is empty")
    kept: dict[tuple[str, ...], None] = {}

    if isinstance(tree_or_paths, ReverseTree):
        def walk(node: LabelNode, path: tuple[str, ...], cut: int) -> None:
            path = path + (node.label,)
            if node.label in conds:
                cut = len(path)
            if not node.children:
                if cut:
                    kept.setdefault(path[:cut], None)
                return
            for child in node.children:
                walk(child, path, cut)

        for node in tree_or_paths.roots:
            walk(node, (), 0)
    else:
        for path in tree_or_paths:
            cut = 0
            for i, label in enumerate(path):
                if label in conds:
                    cut = i + 1
            if cut:
                kept.setdefault(tuple(path[:cut]), None)
    return list(kept)


def prune_cycles(paths: Iterable[Sequence[str]]) -> list[tuple[str, ...]]:
    """Cut every branch at the first label that repeats along it.

    ``paths`` are the root-to-leaf paths of a tree; the result is the
    root-to-leaf paths of the tree left after the cuts.
    """
    trie: dict = {}
    for path in paths:
        node, seen = trie, set()
        for label in path:
            if label in seen:
                break
            seen.add(label)
            node = node.setdefault(label, {})
    out: list[tuple[str, ...]] = []

    def walk(node: dict, prefix: tuple[str, ...]) -> None:
        if not node and prefix:
            out.append(prefix)
        for label, child in node.items():
            walk(child, prefix + (label,))

    walk(trie, ())
    return out


def enumerate_forward_paths(
    pruned: Iterable[Sequence[str]],
    *,
    condition_labels: Iterable[str] | None = None,
    dictionary: NeighborLabelDictionary | None = None,
) -> list[LabelPath]:
    """Reverse aim-first paths into condition-first :class:`LabelPath` objects.

    Paths that repeat a label, or (when given) do not start at a condition
    label or step between non-neighbors, are dropped. Duplicates keep the first
    occurrence.
    """
    conds = frozenset(condition_labels) if condition_labels is not None else None
    out: dict[tuple[str, ...], LabelPath] = {}
    for reverse in pruned:
        if not reverse:
            continue
        labels = tuple(reversed(reverse))
        if len(set(labels)) != len(labels):
            logger.debug("dropping cyclic path %s", labels)
            continue
        if conds is not None and labels[0] not in conds:
            logger.debug("dropping path not anchored at a condition: %s", labels)
            continue
        if dictionary is not None and any(b not in dictionary.neighbors(a) for a, b in zip(labels, labels[1:])):
            logger.debug("dropping path with non-neighbor step: %s", labels)
            continue
        if labels not in out:
            out[labels] = LabelPath(labels, aim=reverse[0])
    return list(out.values())


def _condition_distances(dictionary: NeighborLabelDictionary, conds: frozenset) -> dict[str, int]:
    dist = {c: 0 for c in conds}
    queue = deque(conds)
    while queue:
        label = queue.popleft()
        for nb in dictionary.neighbors(label):
            if nb not in dist:
                dist[nb] = dist[label] + 1
                queue.append(nb)
    return dist


def _pruned_reverse_search(aims: list[str], conds: frozenset, dictionary: NeighborLabelDictionary, max_pop: int):
    """Same output as ``prune_by_conditions(build_reverse_tree(...))`` without materializing the tree.

    A subtree that cannot contain a condition label within the remaining depth
    contributes only the current truncation, so it is not expanded.
    """
    dist = _condition_distances(dictionary, conds)
    far = max_pop + 1
    sorted_nb = {label: dictionary.sorted_neighbors(label) for label in dictionary.entries}
    kept: dict[tuple[str, ...], None] = {}
    path: list[str] = []
    on_path: set[str] = set()

    def visit(label: str, cut: int) -> None:
        path.append(label)
        on_path.add(label)
        if label in conds:
            cut = len(path)
        depth = len(path)
        children = [] if depth >= max_pop else [c for c in sorted_nb[label] if c not in on_path]
        if not children:
            if cut:
                kept.setdefault(tuple(path[:cut]), None)
        else:
            budget = max_pop - depth - 1
            for child in children:
                if dist.get(child, far) <= budget:
                    visit(child, cut)
                elif cut:
                    kept.setdefault(tuple(path[:cut]), None)
        on_path.discard(label)
        path.pop()

    for aim in aims:
        visit(aim, 0)
    return list(kept)


def reverse_reason(
    intent: QueryIntent,
    dictionary: NeighborLabelDictionary,
    max_pop: int = 5,
    *,
    cycle_order: str = CONSTRUCTION,
) -> list[LabelPath]:
    """Candidate condition -> aim label paths before semantic filtering, fewest labels first.

    ``cycle_order`` selects construction-time simple-path enforcement (default)
    or the post-hoc variant that prunes conditions on the unrestricted tree and
    cuts cycles afterwards.
    """
    _check_max_pop(max_pop)
    aims = sorted(set(intent.aim_labels))
    conds = frozenset(intent.condition_labels)
    if not aims or not conds:
        raise ValueError("intent needs at least one aim label and one condition label")
    _check_labels(list(aims) + sorted(conds), dictionary)

    if cycle_order == CONSTRUCTION:
        pruned = _pruned_reverse_search(aims, conds, dictionary, max_pop)
    elif cycle_order == POST_HOC:
        tree = build_reverse_tree(aims, dictionary, max_pop, simple=False)
        pruned = prune_cycles(prune_by_conditions(tree, conds))
    else:
        raise ValueError(f"unknown cycle_order {cycle_order!r}")
    # shorter paths first; ties keep the search order
    paths = sorted(enumerate_forward_paths(pruned, condition_labels=conds, dictionary=dictionary), key=len)
    if not paths:
        raise EmptyPathSetError(
            f"no label path joins conditions {sorted(conds)} to aims {aims} within {max_pop} labels"
        )
    return paths


def trace_forward(intent: QueryIntent, dictionary: NeighborLabelDictionary, max_pop: int = 5) -> list[LabelPath]:
    """Breadth-first simple paths from each condition label, every prefix emitted.

    No aim label is required; relevance is left to the semantic filter.
    """
    _check_max_pop(max_pop)
    conds = sorted(set(intent.condition_labels))
    if not conds:
        raise ValueError("intent has no condition labels")
    _check_labels(conds, dictionary)
    out: dict[tuple[str, ...], LabelPath] = {}
    for cond in conds:
        queue = deque([(cond,)])
        while queue:
            labels = queue.popleft()
            out.setdefault(labels, LabelPath(labels, aim=None))
            if len(labels) >= max_pop:
                continue
            for nb in dictionary.sorted_neighbors(labels[-1]):
                if nb not in labels:
                    queue.append(labels + (nb,))
    return list(out.values())


def render_paths(paths: Iterable[LabelPath]) -> str:
    return "\n".join(p.render() for p in paths)
