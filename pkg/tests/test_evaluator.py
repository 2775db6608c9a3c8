from __future__ import annotations

import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ort.errors import DatasetError
from ort.evaluator import (
    QAItem,
    accuracy,
    evaluate,
    hit_at_1,
    load_dataset,
    normalize_answer,
    precision_recall_f1,
    score_row,
)


def test_hinduism_example():
    preds, gold = ["Christianity", "Hinduism", "Islam"], ["Hinduism"]
    assert hit_at_1(preds, gold) == 1
    p, r, f1 = precision_recall_f1(preds, gold)
    assert p == pytest.approx(1 / 3) and r == 1.0 and f1 == pytest.approx(0.5)
    assert accuracy(preds, gold) == r


def test_normalization():
    assert normalize_answer("  Café  DU  Monde ") == "café du monde"
    assert hit_at_1(["PARIS"], ["Paris"]) == 1
    assert normalize_answer("Café") == normalize_answer("Café")


def test_empty_predictions():
    assert precision_recall_f1([], ["a"]) == (0.0, 0.0, 0.0)
    assert hit_at_1([], ["a"]) == 0


def oracle(preds, gold):
    """Exact rational reference computed from the raw definitions."""
    P = {normalize_answer(x) for x in preds} - {""}
    G = {normalize_answer(x) for x in gold} - {""}
    hits = sum(1 for x in P if x in G)
    p = Fraction(hits, len(P)) if P else Fraction(0)
    r = Fraction(sum(1 for g in G if g in P), len(G)) if G else Fraction(0)
    f1 = 2 * p * r / (p + r) if p + r else Fraction(0)
    return int(hits > 0), float(p), float(r), float(f1)


def test_random_rows_match_oracle_and_accuracy_equals_recall():
    rng = random.Random(0)
    vocab = [f"ans{i}" for i in range(12)] + ["Ans1", " ans2 "]
    for _ in range(1000):
        preds = rng.sample(vocab, rng.randint(0, 6))
        gold = rng.sample(vocab, rng.randint(1, 4))
        row = score_row(QAItem("x", "q", tuple(gold)), preds)
        h, p, r, f1 = oracle(preds, gold)
        assert row.hit1 == h
        assert row.precision == pytest.approx(p, abs=1e-12)
        assert row.recall == pytest.approx(r, abs=1e-12)
        assert row.f1 == pytest.approx(f1, abs=1e-12)
        assert row.accuracy == row.recall


@settings(max_examples=200, deadline=None)
@given(st.lists(st.text(max_size=4)), st.lists(st.text(min_size=1, max_size=4), min_size=1))
def test_property_metric_bounds(preds, gold):
    p, r, f1 = precision_recall_f1(preds, gold)
    assert 0 <= p <= 1 and 0 <= r <= 1 and 0 <= f1 <= 1
    assert min(p, r) - 1e-12 <= f1 <= max(p, r) + 1e-12
    assert hit_at_1(preds, gold) == int(r > 0)


def write_jsonl(path, rows):
    path.write_text("".join((r if isinstance(r, str) else json.dumps(r)) + "\n" for r in rows))


def test_load_dataset_errors_carry_line_numbers(tmp_path):
    good = {"id": "a", "question": "q", "answers": ["x"], "hops": 1}
    cases = [
        ["{not json"],
        [good, {"id": "a", "question": "q", "answers": ["x"]}],
        [{"id": "b", "question": "q", "answers": []}],
        [{"id": "b", "question": "", "answers": ["x"]}],
        [{"id": "b", "question": "q", "answers": ["x"], "hops": -1}],
    ]
    for rows in cases:
        path = tmp_path / "d.jsonl"
        write_jsonl(path, rows)
        with pytest.raises(DatasetError) as info:
            load_dataset(path)
        assert f":{len(rows)}:" in str(info.value)
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "missing.jsonl")


def test_evaluate_keeps_order_and_records_failures(tmp_path):
    items = [QAItem(f"q{i}", f"question {i}", (f"a{i}",)) for i in range(6)]

    def runner(item):
        if item.id == "q3":
            raise RuntimeError("boom")
        return [f"a{item.id[1:]}"]

    report = evaluate(items, runner, "full", workers=3, metadata={"seed": 0})
    assert [r.id for r in report.rows] == [i.id for i in items]
    bad = report.rows[3]
    assert bad.error == "RuntimeError: boom" and bad.f1 == 0.0
    assert report.macro["hit1"] == pytest.approx(5 / 6)
    assert report.to_dict()["errors"] == 1
    assert report.to_json() == evaluate(items, runner, "full", metadata={"seed": 0}).to_json()
    tsv = report.to_tsv().splitlines()
    assert tsv[0].split("\t")[0] == "id" and len(tsv) == 7
    assert "macro" in report.to_text()
