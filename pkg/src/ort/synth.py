"""Synthetic knowledge graphs: a Freebase-sized scale dump and a small ablation benchmark.

``python3 -m ort.synth scale OUT.tsv`` writes the scale dump;
``python3 -m ort.synth bench DIR`` writes the benchmark KG, dataset and script
and prints the per-mode macro scores.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import random
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import MODES, NO_RULES, RunConfig
from .evaluator import EvalReport, QAItem, evaluate
from .kgstore import Triple, build_index
from .llm.backends import ScriptedBackend
from .llm.gateway import answer_block, prompt_entity_paths, prompt_paths, prompt_question
from .llm.templates import GENERATE_ANSWER, RECOGNIZE, SEMANTIC_FILTER
from .miner import parse_formatted_paths
from .ontology import build_neighbor_dictionary, ontology_from_store
from .pipeline import Pipeline, make_gateway

# CWQ-sized defaults
SCALE_TRIPLES = 2_294_264
SCALE_RELATIONS = 4_726
SCALE_ENTITIES = 700_000
SCALE_LABELS = 1_500


def scale_triples(n_triples: int = SCALE_TRIPLES, n_relations: int = SCALE_RELATIONS,
                  n_entities: int = SCALE_ENTITIES, n_labels: int = SCALE_LABELS, seed: int = 0):
    """Return ``(subjects, relations, objects)`` integer arrays plus the relation label table.

    Entity ``e`` belongs to label ``e % n_labels``; each relation joins two labels
    and its endpoints are drawn from those labels' entity pools.
    """
    rng = np.random.default_rng(seed)
    rel_labels = rng.integers(0, n_labels, size=(n_relations, 2))
    rel = rng.integers(0, n_relations, size=n_triples)
    pool = n_entities // n_labels
    s = rel_labels[rel, 0] + n_labels * rng.integers(0, pool, size=n_triples)
    o = rel_labels[rel, 1] + n_labels * rng.integers(0, pool, size=n_triples)
    return s, rel, o, rel_labels


def _relation_names(rel_labels: np.ndarray) -> list[str]:
    return [f"d{i % 97}.l{a}.l{b}" for i, (a, b) in enumerate(rel_labels.tolist())]


def write_scale_kg(path, n_triples: int = SCALE_TRIPLES, *, seed: int = 0, **sizes) -> int:
    s, rel, o, rel_labels = scale_triples(n_triples, seed=seed, **sizes)
    names = _relation_names(rel_labels)
    with open(path, "w", encoding="utf-8") as fh:
        chunk = 200_000
        for start in range(0, n_triples, chunk):
            part = zip(s[start:start + chunk].tolist(), rel[start:start + chunk].tolist(), o[start:start + chunk].tolist())
            fh.write("".join(f"m.{a:06x}\t{names[r]}\tm.{b:06x}\n" for a, r, b in part))
    return n_triples


def sample_lines(path, n: int, seed: int = 0) -> list[Triple]:
    """Uniform sample of ``n`` triples from a TSV (reservoir sampling)."""
    rng = random.Random(seed)
    out: list[Triple] = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            t = Triple(*line.rstrip("\n").split("\t"))
            if i < n:
                out.append(t)
            else:
                j = rng.randrange(i + 1)
                if j < n:
                    out[j] = t
    return out


# ---------------------------------------------------------------- benchmark

WORDS = (
    "person city country team league award film actor book author language river",
    "mountain company product school album song genre religion event season coach stadium",
)
LABELS = " ".join(WORDS).split()


@dataclass
class Benchmark:
    triples: list[Triple]
    dataset: list[QAItem]
    script: dict
    gold_paths: dict[str, tuple[str, ...]]


def _walk(rng: random.Random, adj: dict[str, list[str]], length: int) -> list[str] | None:
    path = [rng.choice(sorted(adj))]
    while len(path) < length:
        options = [b for b in adj[path[-1]] if b not in path]
        if not options:
            return None
        path.append(rng.choice(options))
    return path


def make_benchmark(n_triples: int = 500, n_questions: int = 40, n_pairs: int = 45,
                   per_label: int = 12, seed: int = 7) -> Benchmark:
    """Random label ontology with planted gold chains, padded with random edges to ``n_triples``."""
    rng = random.Random(seed)
    pairs: set[tuple[str, str]] = set()
    # a spanning path keeps the label graph connected
    order = LABELS[:]
    rng.shuffle(order)
    for a, b in zip(order, order[1:]):
        pairs.add((a, b))
    while len(pairs) < n_pairs:
        a, b = rng.sample(LABELS, 2)
        if (b, a) not in pairs:
            pairs.add((a, b))
    relation = {frozenset(p): (f"bench.{p[0]}.{p[1]}", p[0]) for p in sorted(pairs)}
    adj: dict[str, list[str]] = defaultdict(list)
    for a, b in sorted(pairs):
        adj[a].append(b)
        adj[b].append(a)
    entities = {lab: [f"{lab}_{i:02d}" for i in range(per_label)] for lab in LABELS}

    def edge(x_label, x, y_label, y) -> Triple:
        rel, subj = relation[frozenset((x_label, y_label))]
        return Triple(x, rel, y) if subj == x_label else Triple(y, rel, x)

    triples: dict[Triple, None] = {}
    plans = []
    while len(plans) < n_questions:
        path = _walk(rng, adj, rng.choice((2, 3, 3, 4)))
        if path is None:
            continue
        chain = [rng.choice(entities[lab]) for lab in path]
        for i in range(len(path) - 1):
            triples.setdefault(edge(path[i], chain[i], path[i + 1], chain[i + 1]))
        plans.append((path, chain))
    sorted_pairs = sorted(pairs)
    while len(triples) < n_triples:
        a, b = rng.choice(sorted_pairs)
        triples.setdefault(edge(a, rng.choice(entities[a]), b, rng.choice(entities[b])))
    triple_list = list(triples)

    # gold answers: every endpoint reachable along the gold label path
    step = defaultdict(set)
    for t in triple_list:
        rel_name = t.relation
        _, sl, ol = rel_name.split(".")
        step[(t.subject, sl, ol)].add(t.object)
        step[(t.object, ol, sl)].add(t.subject)
    dataset, script, gold_paths = [], {}, {}
    for n, (path, chain) in enumerate(plans):
        frontier = {chain[0]}
        for a, b in zip(path, path[1:]):
            frontier = set().union(*(step[(e, a, b)] for e in frontier))
        gold = sorted(frontier)
        middle = " and ".join(path[1:-1])
        via = f" through its {middle}" if middle else ""
        question = f"Q{n:02d}: starting from {chain[0]}{via}, which {path[-1]} is reached?"
        qid = f"b{n:02d}"
        lucky = int(hashlib.sha256(question.encode()).hexdigest(), 16) % 10 < 3
        wrong = [e for e in entities[path[-1]] if e not in gold]
        dataset.append(QAItem(qid, question, tuple(gold), len(path) - 1))
        script[question] = {
            "conditions": [[chain[0], path[0]]],
            "aims": [[path[-1], path[-1]]],
            "direct": gold[:1] if lucky else wrong[:1],
        }
        gold_paths[qid] = tuple(path)
    return Benchmark(triple_list, dataset, script, gold_paths)


def _overlap(path: str, question_words: set[str]) -> int:
    labels = path.split(" -> ")
    return sum(1 if lab in question_words else -1 for lab in labels)


def bench_handler(script: dict, select: int = 3):
    """Scripted LLM: oracle recognition, top-``select`` paths by label overlap with the
    question, answers read off the ends of complete reasoning paths."""

    def handler(template: str, messages: list[dict]) -> str:
        prompt = messages[0]["content"]
        question = prompt_question(prompt)
        entry = script[question]
        if template == RECOGNIZE:
            payload = {"conditions": entry["conditions"], "aims": entry["aims"]}
            return "```json\n" + json.dumps(payload) + "\n```\n"
        if template == SEMANTIC_FILTER:
            words = set(question.replace(",", " ").replace("?", " ").split())
            candidates = prompt_paths(prompt)
            ranked = sorted(range(len(candidates)), key=lambda i: (-_overlap(candidates[i], words), i))
            return answer_block(candidates[i] for i in ranked[:select])
        if template == GENERATE_ANSWER:
            text = prompt_entity_paths(prompt)
            if not text:
                return answer_block(entry["direct"])
            answers: dict[str, None] = {}
            for labels, ents, _ in parse_formatted_paths(text):
                answers.setdefault(ents[-1])
            return answer_block(answers or entry["direct"])
        raise KeyError(template)

    return handler


def run_benchmark(bench: Benchmark, modes=MODES, config: RunConfig | None = None) -> dict[str, EvalReport]:
    config = config or RunConfig()
    store = build_index(bench.triples)
    dictionary = build_neighbor_dictionary(ontology_from_store(store))
    gateway = make_gateway(config, ScriptedBackend(bench_handler(bench.script), name="bench-script"))
    pipeline = Pipeline(config, gateway, store=store, dictionary=dictionary)
    reports = {}
    for mode in modes:
        reports[mode] = evaluate(
            bench.dataset,
            lambda item, mode=mode: pipeline.ask(item.question, qid=item.id, mode=mode).answers,
            mode,
            metadata={"benchmark": "synthetic", "seed": config.seed},
        )
    return reports


def write_benchmark(bench: Benchmark, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bench_kg.tsv").write_text("".join(f"{s}\t{r}\t{o}\n" for s, r, o in bench.triples), encoding="utf-8")
    with open(out / "bench_dataset.jsonl", "w", encoding="utf-8") as fh:
        for item in bench.dataset:
            row = {"id": item.id, "question": item.question, "answers": list(item.gold_answers), "hops": item.hops}
            fh.write(json.dumps(row) + "\n")
    (out / "bench_script.json").write_text(json.dumps(bench.script, indent=1) + "\n", encoding="utf-8")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="python3 -m ort.synth", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("scale")
    p.add_argument("out")
    p.add_argument("--triples", type=int, default=SCALE_TRIPLES)
    p.add_argument("--seed", type=int, default=0)
    p = sub.add_parser("bench")
    p.add_argument("out")
    p.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)
    if args.command == "scale":
        print(f"wrote {write_scale_kg(args.out, args.triples, seed=args.seed)} triples to {args.out}")
        return 0
    bench = make_benchmark(seed=args.seed)
    write_benchmark(bench, args.out)
    for mode, report in run_benchmark(bench).items():
        m = report.macro
        print(f"{mode}\thit1={m['hit1']:.4f}\tprecision={m['precision']:.4f}\trecall={m['recall']:.4f}\tf1={m['f1']:.4f}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
