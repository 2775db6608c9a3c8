"""Guided answer mining: walk label paths over concrete entities."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .kgstore import KgStore, normalize_name
from .ontology import FORWARD, NeighborLabelDictionary, relations_between
from .reasoner import LabelPath


@dataclass
class EntityNode:
    entity: str
    label: str
    relation: str | None = None  # edge from the parent, None at a root
    direction: str | None = None
    children: list["EntityNode"] = field(default_factory=list)


@dataclass
class EntityPathTree:
    path: LabelPath
    roots: list[EntityNode]
    diagnostics: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class EntityStep:
    label: str
    entity: str
    relation: str | None  # relation leading to the next step


@dataclass(frozen=True)
class EntityPath:
    steps: tuple[EntityStep, ...]
    source: LabelPath

    @property
    def complete(self) -> bool:
        return len(self.steps) == len(self.source.labels)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.steps)

    @property
    def entities(self) -> tuple[str, ...]:
        return tuple(s.entity for s in self.steps)


def _sample(items: list, top_k: int, rng: random.Random) -> list:
    if len(items) <= top_k:
        return items
    picked = sorted(rng.sample(range(len(items)), top_k))
    return [items[i] for i in picked]


def _step_relations(dictionary: NeighborLabelDictionary, a: str, b: str) -> tuple[list[str], list[str]]:
    out_rels, in_rels = [], []
    for relation, orientation in relations_between(dictionary, a, b):
        if orientation == FORWARD:
            out_rels.append(relation)
            if a == b:
                in_rels.append(relation)
        else:
            in_rels.append(relation)
    return out_rels, in_rels


def mine_entity_tree(
    store: KgStore,
    dictionary: NeighborLabelDictionary,
    path: LabelPath,
    top_k: int = 10,
    rng_seed: int | str = 0,
    condition_entities: Iterable[str] = (),
) -> EntityPathTree:
    """Expand ``path`` label by label over the KG.

    Roots are the recognized condition entities that carry the first label, or
    every entity with that label when none resolve. Any fan-out above
    ``top_k`` (roots included) is sampled uniformly without replacement from
    a generator seeded by ``rng_seed`` and the path.
    """
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    rng = random.Random(f"{rng_seed}|{path.render()}")
    labels = path.labels
    tree = EntityPathTree(path, [])
    first = labels[0]

    anchors = [normalize_name(e) for e in condition_entities]
    roots = sorted({e for e in anchors if first in store.entity_labels(e)})
    if not roots:
        if anchors:
            tree.diagnostics.append(
                f"no condition entity among {anchors} carries label {first!r}; using all entities with it"
            )
        roots = sorted(store.label_entities(first))
    if not roots:
        tree.diagnostics.append(f"no entity carries label {first!r}")
        return tree
    tree.roots = [EntityNode(e, first) for e in _sample(roots, top_k, rng)]

    steps = [_step_relations(dictionary, a, b) for a, b in zip(labels, labels[1:])]

    def expand(node: EntityNode, depth: int) -> None:
        if depth + 1 >= len(labels):
            return
        out_rels, in_rels = steps[depth]
        candidates = store.adjacent(node.entity, out_rels, in_rels)
        for relation, nb, direction in _sample(candidates, top_k, rng):
            child = EntityNode(nb, labels[depth + 1], relation, direction)
            node.children.append(child)
            expand(child, depth + 1)

    for root in tree.roots:
        expand(root, 0)
    return tree


def collect_entity_paths(tree: EntityPathTree) -> list[EntityPath]:
    """Root-to-leaf entity paths in DFS order, dead ends included."""
    out: list[EntityPath] = []

    def walk(node: EntityNode, trail: list[EntityNode]) -> None:
        trail.append(node)
        if not node.children:
            steps = tuple(
                EntityStep(n.label, n.entity, trail[i + 1].relation if i + 1 < len(trail) else None)
                for i, n in enumerate(trail)
            )
            out.append(EntityPath(steps, tree.path))
        for child in node.children:
            walk(child, trail)
        trail.pop()

    for root in tree.roots:
        walk(root, [])
    return out


def mine_paths(
    store: KgStore,
    dictionary: NeighborLabelDictionary,
    paths: Sequence[LabelPath],
    top_k: int = 10,
    rng_seed: int | str = 0,
    condition_entities: Iterable[str] = (),
) -> tuple[list[EntityPath], list[str]]:
    """Mine every label path; returns all entity paths and the collected diagnostics."""
    anchors = list(condition_entities)
    entity_paths: list[EntityPath] = []
    diagnostics: list[str] = []
    for path in paths:
        tree = mine_entity_tree(store, dictionary, path, top_k, rng_seed, anchors)
        diagnostics.extend(tree.diagnostics)
        entity_paths.extend(collect_entity_paths(tree))
    return entity_paths, diagnostics


def relation_tail(relation: str) -> str:
    return relation.rsplit(".", 1)[-1]


def format_path(path: EntityPath) -> str:
    parts = []
    for step in path.steps:
        parts.append(f"[{step.label}] {step.entity}")
        if step.relation is not None:
            parts.append(f" -> {relation_tail(step.relation)} ")
    return "".join(parts)


def format_paths(paths: Iterable[EntityPath]) -> str:
    return "\n".join(f"reasoning path {n}: {format_path(p)}" for n, p in enumerate(paths, 1))


_LINE = re.compile(r"^reasoning path (\d+): (.*)$")
_FIRST = re.compile(r"^\[([^\]]+)\] (.+)$")
_NEXT = re.compile(r"^(\S+) \[([^\]]+)\] (.+)$")


def parse_formatted_paths(text: str) -> list[tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]]:
    """Inverse of :func:`format_paths`: ``(labels, entities, relation_tails)`` per line.

    Raises ``ValueError`` on any line that does not match the format exactly.
    Entity names containing ``" -> "`` cannot be recovered.
    """
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise ValueError(f"line {lineno}: not a reasoning path line")
        chunks = m.group(2).split(" -> ")
        first = _FIRST.match(chunks[0])
        if not first:
            raise ValueError(f"line {lineno}: bad first step {chunks[0]!r}")
        labels, entities, tails = [first.group(1)], [first.group(2)], []
        for chunk in chunks[1:]:
            step = _NEXT.match(chunk)
            if not step:
                raise ValueError(f"line {lineno}: bad step {chunk!r}")
            tails.append(step.group(1))
            labels.append(step.group(2))
            entities.append(step.group(3))
        out.append((tuple(labels), tuple(entities), tuple(tails)))
    return out
