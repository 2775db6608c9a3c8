"""Label-level ontology: abstract triples and the neighbor label dictionary."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .errors import LabelExtractionError
from .kgstore import KgStore, extract_labels, normalize_name

FORWARD = "forward"   # first label is the relation's subject
BACKWARD = "backward"  # second label is the relation's subject


class AbstractTriple(NamedTuple):
    subject_label: str
    relation: str
    object_label: str


def build_ontology(triples: Iterable, *, strict: bool = False, problems: list | None = None) -> set[AbstractTriple]:
    """Map each concrete triple to ``(subject_label, relation, object_label)`` and deduplicate."""
    seen: set[str] = set()
    out: set[AbstractTriple] = set()
    for _, relation, _ in triples:
        relation = normalize_name(relation)
        if relation in seen:
            continue
        seen.add(relation)
        try:
            a, b = extract_labels(relation)
        except LabelExtractionError as err:
            if strict:
                raise
            if problems is not None:
                problems.append(err)
            continue
        out.add(AbstractTriple(a, relation, b))
    return out


def ontology_from_store(store: KgStore) -> set[AbstractTriple]:
    # labels derive from the relation alone, so each stored relation induces exactly one abstract triple
    return {AbstractTriple(*_with_relation(r)) for r in store.relations}


def _with_relation(relation: str) -> tuple[str, str, str]:
    a, b = extract_labels(relation)
    return a, relation, b


@dataclass(frozen=True)
class NeighborLabelDictionary:
    """``entries`` maps a label to its neighbor labels (undirected).

    ``relation_index`` is keyed by the unordered label pair and holds
    ``(relation, subject_label)`` so orientation can be recovered later.
    """

    entries: dict[str, frozenset[str]] = field(default_factory=dict)
    relation_index: dict[frozenset, frozenset[tuple[str, str]]] = field(default_factory=dict)

    def __contains__(self, label: str) -> bool:
        return label in self.entries

    def neighbors(self, label: str) -> frozenset[str]:
        return self.entries.get(label, frozenset())

    def sorted_neighbors(self, label: str) -> list[str]:
        return sorted(self.entries.get(label, ()))

    def check_symmetry(self) -> None:
        for a, nbrs in self.entries.items():
            for b in nbrs:
                if a not in self.entries.get(b, ()):
                    raise AssertionError(f"neighbor dictionary not symmetric: {a!r} -> {b!r}")


def build_neighbor_dictionary(ontology: Iterable[AbstractTriple]) -> NeighborLabelDictionary:
    entries: dict[str, set[str]] = {}
    index: dict[frozenset, set[tuple[str, str]]] = {}
    for a, relation, b in ontology:
        entries.setdefault(a, set()).add(b)
        entries.setdefault(b, set()).add(a)
        index.setdefault(frozenset((a, b)), set()).add((relation, a))
    d = NeighborLabelDictionary(
        entries={k: frozenset(v) for k, v in sorted(entries.items())},
        relation_index={k: frozenset(v) for k, v in index.items()},
    )
    d.check_symmetry()
    return d


def label_list(dictionary: NeighborLabelDictionary) -> list[str]:
    return sorted(dictionary.entries)


def relations_between(dictionary: NeighborLabelDictionary, a: str, b: str) -> set[tuple[str, str]]:
    """Relations joining labels ``a`` and ``b``, tagged FORWARD when ``a`` is the subject.

    A self-loop relation (``a == b``) is reported once as FORWARD.
    """
    out = set()
    for relation, subject_label in dictionary.relation_index.get(frozenset((a, b)), ()):
        out.add((relation, FORWARD if subject_label == a else BACKWARD))
    return out


def write_ontology(ontology: Iterable[AbstractTriple], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in sorted(ontology):
            fh.write(f"{t.subject_label}\t{t.relation}\t{t.object_label}\n")


def read_ontology(path) -> set[AbstractTriple]:
    out = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line:
                out.add(AbstractTriple(*line.split("\t")))
    return out
