"""Knowledge-graph question answering by reverse label reasoning."""

from .kgstore import KgStore, Triple, build_index, entities_with_label, extract_labels, load_index, neighbors, parse_triples, save_index
from .ontology import AbstractTriple, NeighborLabelDictionary, build_neighbor_dictionary, build_ontology, label_list, relations_between
from .reasoner import LabelPath, QueryIntent, ReverseTree, build_reverse_tree, enumerate_forward_paths, prune_by_conditions, reverse_reason, trace_forward

__version__ = "0.1.0"

__all__ = [
    "AbstractTriple",
    "KgStore",
    "LabelPath",
    "NeighborLabelDictionary",
    "QueryIntent",
    "ReverseTree",
    "Triple",
    "build_index",
    "build_neighbor_dictionary",
    "build_ontology",
    "build_reverse_tree",
    "entities_with_label",
    "enumerate_forward_paths",
    "extract_labels",
    "label_list",
    "load_index",
    "neighbors",
    "parse_triples",
    "prune_by_conditions",
    "relations_between",
    "reverse_reason",
    "save_index",
    "trace_forward",
]
