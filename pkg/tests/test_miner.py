from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_kg
from ort.errors import EmptyPathSetError
from ort.kgstore import Triple, build_index
from ort.miner import (
    EntityPath,
    EntityStep,
    collect_entity_paths,
    format_path,
    format_paths,
    mine_entity_tree,
    mine_paths,
    parse_formatted_paths,
)
from ort.ontology import build_neighbor_dictionary, ontology_from_store
from ort.reasoner import LabelPath, QueryIntent, reverse_reason


def setup(triples):
    store = build_index(triples)
    return store, build_neighbor_dictionary(ontology_from_store(store))


def edge_confirmed(triples: set, a: str, relation: str, b: str) -> bool:
    return (a, relation, b) in triples or (b, relation, a) in triples


def all_trees(node):
    yield node
    for child in node.children:
        yield from all_trees(child)


def test_simple_chain():
    store, d = setup([Triple("Lou Seal", "sports.mascot.team", "SF Giants")])
    tree = mine_entity_tree(store, d, LabelPath(("mascot", "team")), condition_entities=["Lou Seal"])
    paths = collect_entity_paths(tree)
    assert [p.entities for p in paths] == [("Lou Seal", "SF Giants")]


def test_relation_direction_respected():
    triples = [
        Triple("giants", "sports.team.championship", "ws2014"),
        Triple("ws2014", "sports.championship.team", "royals"),  # reverse-oriented edge between same labels
    ]
    store, d = setup(triples)
    paths = collect_entity_paths(mine_entity_tree(store, d, LabelPath(("team", "championship", "team")),
                                                  condition_entities=["giants"]))
    ents = sorted(p.entities for p in paths)
    assert ("giants", "ws2014", "royals") in ents


def test_incomplete_paths_kept():
    store, d = setup([Triple("a1", "x.a.b", "b1"), Triple("c1", "x.b.c", "b2")])
    paths = collect_entity_paths(mine_entity_tree(store, d, LabelPath(("a", "b", "c")), condition_entities=["a1"]))
    assert len(paths) == 1 and not paths[0].complete and paths[0].entities == ("a1", "b1")


def test_root_fallback_diagnostic():
    store, d = setup([Triple("a1", "x.a.b", "b1"), Triple("a2", "x.a.b", "b2")])
    tree = mine_entity_tree(store, d, LabelPath(("a", "b")), condition_entities=["nobody"])
    assert {n.entity for n in tree.roots} == {"a1", "a2"}
    assert tree.diagnostics and "nobody" in tree.diagnostics[0]


def test_top_k_applies_to_roots_and_children():
    triples = [Triple("hub", "x.a.b", f"b{i}") for i in range(30)] + [Triple(f"a{i}", "x.a.b", "b0") for i in range(30)]
    store, d = setup(triples)
    tree = mine_entity_tree(store, d, LabelPath(("a", "b")), top_k=5, rng_seed=1)
    assert len(tree.roots) == 5
    for root in tree.roots:
        assert len(root.children) <= 5


def test_top_k_rejects_zero():
    store, d = setup([Triple("a1", "x.a.b", "b1")])
    with pytest.raises(ValueError):
        mine_entity_tree(store, d, LabelPath(("a", "b")), top_k=0)


def _random_case(rng):
    triples = random_kg(rng, n_triples=rng.randint(50, 1000), n_labels=5, n_relations=9, per_label=12)
    store, d = setup(triples)
    labels = sorted(d.entries)
    cond, aim = rng.choice(labels), rng.choice(labels)
    try:
        paths = reverse_reason(QueryIntent(((cond, cond),), ((aim, aim),)), d, 4)
    except EmptyPathSetError:
        return None
    anchors = sorted(store.label_entities(cond))[:1]
    return triples, store, d, paths, anchors


def test_mining_soundness_against_triple_scan():
    rng = random.Random(0)
    checked = 0
    for _ in range(40):
        case = _random_case(rng)
        if not case:
            continue
        triples, store, d, paths, anchors = case
        tset = set(triples)
        top_k = rng.randint(1, 6)
        for lp in paths:
            tree = mine_entity_tree(store, d, lp, top_k=top_k, rng_seed=3, condition_entities=anchors)
            assert len(tree.roots) <= top_k
            for root in tree.roots:
                for node in all_trees(root):
                    assert len(node.children) <= top_k
                    assert lp.labels[0] in store.entity_labels(root.entity)
                    for child in node.children:
                        edge = ((node.entity, child.relation, child.entity) if child.direction == "out"
                                else (child.entity, child.relation, node.entity))
                        assert edge in tset
                        assert child.label in store.entity_labels(child.entity)
            for ep in collect_entity_paths(tree):
                assert ep.labels == lp.labels[: len(ep.steps)]
                for a, b in zip(ep.steps, ep.steps[1:]):
                    assert edge_confirmed(tset, a.entity, a.relation, b.entity)
                checked += 1
    assert checked > 100


def test_same_seed_same_tree_different_seed_may_differ():
    triples = [Triple(f"a{i}", "x.a.b", f"b{j}") for i in range(20) for j in range(20) if (i * j) % 3 == 0]
    store, d = setup(triples)
    lp = LabelPath(("a", "b"))
    t1 = mine_entity_tree(store, d, lp, top_k=3, rng_seed=42)
    t2 = mine_entity_tree(store, d, lp, top_k=3, rng_seed=42)
    assert t1 == t2
    others = {tuple(n.entity for n in mine_entity_tree(store, d, lp, top_k=3, rng_seed=s).roots) for s in range(10)}
    assert len(others) > 1


def test_leaf_count_equals_path_count():
    rng = random.Random(5)
    for _ in range(20):
        case = _random_case(rng)
        if not case:
            continue
        _, store, d, paths, anchors = case
        for lp in paths[:5]:
            tree = mine_entity_tree(store, d, lp, top_k=4, condition_entities=anchors)
            leaves = sum(1 for r in tree.roots for n in all_trees(r) if not n.children)
            assert leaves == len(collect_entity_paths(tree))


def test_format_matches_reference_line():
    lp = LabelPath(("mascot", "team", "championship"))
    ep = EntityPath((
        EntityStep("mascot", "Lou Seal", "sports.mascot.team"),
        EntityStep("team", "San Francisco Giants", "sports.team.championship"),
        EntityStep("championship", "2014 World Series", None),
    ), lp)
    assert format_path(ep) == ("[mascot] Lou Seal -> team [team] San Francisco Giants -> championship "
                               "[championship] 2014 World Series")
    assert format_paths([ep, ep]).splitlines()[1].startswith("reasoning path 2: ")


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        parse_formatted_paths("not a path line")


ent = st.text(alphabet="abc XYZ_.0", min_size=1, max_size=8).map(str.strip).filter(lambda s: s and " -> " not in s)
lab = st.text(alphabet="abcxyz_", min_size=1, max_size=6)
rel = st.text(alphabet="abc_", min_size=1, max_size=5)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.tuples(lab, ent, rel), min_size=1, max_size=4), min_size=1, max_size=4))
def test_property_format_parse_round_trip(specs):
    paths = []
    for spec in specs:
        steps = tuple(EntityStep(l, e, f"dom.x.{r}" if i + 1 < len(spec) else None) for i, (l, e, r) in enumerate(spec))
        paths.append(EntityPath(steps, LabelPath(tuple(s.label for s in steps))))
    parsed = parse_formatted_paths(format_paths(paths))
    assert [(p.labels, p.entities) for p in paths] == [(lbl, ents) for lbl, ents, _ in parsed]
    assert [tuple(s.relation.rsplit(".", 1)[-1] for s in p.steps[:-1]) for p in paths] == [t for _, _, t in parsed]


def test_mine_paths_collects_diagnostics():
    store, d = setup([Triple("a1", "x.a.b", "b1")])
    paths, diags = mine_paths(store, d, [LabelPath(("a", "b"))], condition_entities=["ghost"])
    assert len(paths) == 1 and len(diags) == 1
