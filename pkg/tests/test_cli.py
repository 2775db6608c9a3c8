from __future__ import annotations

import json
import subprocess
import sys

import pytest

from ort.cli import main
from ort.config import toy_dir
from ort.kgstore import load_index
from ort.ontology import read_ontology
from ort.synth import make_benchmark, scale_triples, write_benchmark

LOU = "Lou Seal is the mascot for the team that last won the World Series when?"


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_build_index_writes_index_and_ontology(tmp_path, capsys):
    out = tmp_path / "toy.idx"
    code, stdout, _ = run(["build-index", str(toy_dir() / "toy_kg.tsv"), "-o", str(out)], capsys)
    assert code == 0 and "triples=" in stdout and "relations=" in stdout
    store = load_index(out)
    assert len(read_ontology(f"{out}.ontology.tsv")) == store.relation_count


def test_build_index_empty_file(tmp_path, capsys):
    kg = tmp_path / "empty.tsv"
    kg.write_text("")
    code, stdout, _ = run(["build-index", str(kg), "-o", str(tmp_path / "e.idx")], capsys)
    assert code == 0 and "triples=0 entities=0 relations=0 labels=0" in stdout
    assert load_index(tmp_path / "e.idx").triple_count == 0


def test_build_index_strict_corrupt_line(tmp_path, capsys):
    kg = tmp_path / "bad.tsv"
    kg.write_text("a\tx.p.q\tb\nonly two\tfields\n")
    code, _, err = run(["build-index", "--strict", str(kg), "-o", str(tmp_path / "b.idx")], capsys)
    assert code == 3
    assert err.startswith("ort: error[data]") and "line 2" in err and err.count("\n") == 1
    code, _, _ = run(["build-index", str(kg), "-o", str(tmp_path / "b.idx")], capsys)
    assert code == 0


def test_ask_json_and_text(capsys, tmp_path):
    code, stdout, _ = run(["ask", "--toy", "--json", LOU], capsys)
    assert code == 0
    record = json.loads(stdout)
    assert record["Final_Answer"] == ["2014 World Series"] and "Timings" not in record
    code, stdout, _ = run(["ask", "--toy", "--timings", "--json", "--record", str(tmp_path / "r.json"), LOU], capsys)
    assert "Timings" in json.loads(stdout) and (tmp_path / "r.json").exists()
    code, stdout, _ = run(["ask", "--toy", LOU], capsys)
    assert "Final_Answer:\n2014 World Series" in stdout


def test_ask_no_rules_has_no_rule_paths(capsys):
    code, stdout, _ = run(["ask", "--toy", "--mode", "no_rules", "--json", LOU], capsys)
    assert code == 0 and "Rule_Paths" not in json.loads(stdout)


def test_ask_empty_path_exit_code(capsys):
    question = "What currency was used where Dune Messiah was written?"
    code, _, err = run(["ask", "--toy", question], capsys)
    assert code == 5 and "error[empty-path]" in err and "stage=reverse_reason" in err


def test_ask_mock_miss_is_gateway_error(capsys):
    code, _, err = run(["ask", "--toy", "An unrecorded question?"], capsys)
    assert code == 4 and "error[gateway]" in err


def test_inspect_paths(capsys):
    code, stdout, _ = run(["inspect-paths", "--toy", "--max-pop", "4", LOU], capsys)
    assert code == 0 and "candidates (10):" in stdout and "selected (3):" in stdout
    code, stdout, _ = run(["inspect-paths", "--toy", "--mode", "no_llm_filter", "--max-pop", "4", LOU], capsys)
    assert "candidates (10):" in stdout and "selected (10):" in stdout
    code, stdout, _ = run(["inspect-paths", "--toy", "What currency was used where Dune Messiah was written?"],
                          capsys)
    assert code == 5 and "no label path found" in stdout


def test_eval_all_modes_writes_reports(tmp_path, capsys):
    code, stdout, _ = run(["eval", "--toy", "--all-modes", "--out", str(tmp_path)], capsys)
    assert code == 0 and len(stdout.strip().splitlines()) == 4
    for mode in ("full", "no_llm_filter", "trace_forward", "no_rules"):
        for ext in ("json", "txt", "tsv"):
            assert (tmp_path / f"report-{mode}.{ext}").exists()
    assert (tmp_path / "metrics.png").stat().st_size > 0


def test_eval_missing_dataset(tmp_path, capsys):
    code, _, err = run(["eval", "--toy", str(tmp_path / "none.jsonl"), "--out", str(tmp_path)], capsys)
    assert code == 3 and "cannot open dataset" in err


def test_stats_histogram(tmp_path, capsys):
    code, stdout, _ = run(["stats", "--toy", "--out", str(tmp_path / "hops.png")], capsys)
    assert code == 0 and stdout.splitlines()[0] == "hops\tquestions\tpercent"
    assert (tmp_path / "hops.png").exists()


def test_bad_arguments_exit_config(capsys):
    with pytest.raises(SystemExit) as info:
        main(["ask", "--toy", "--mode", "bogus", "q"])
    assert info.value.code == 2
    assert main(["ask", "--toy", "--max-pop", "0", "q"]) == 2


def test_console_script_entry_point():
    out = subprocess.run([sys.executable, "-m", "ort.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "inspect-paths" in out.stdout


# ---------------------------------------------------------------- synthetic data

def test_scale_generator_respects_label_pools():
    s, rel, o, rel_labels = scale_triples(5000, n_relations=50, n_entities=2000, n_labels=20, seed=1)
    assert len(s) == 5000
    assert ((s % 20) == rel_labels[rel, 0]).all() and ((o % 20) == rel_labels[rel, 1]).all()


def test_benchmark_is_reproducible_and_sized(tmp_path):
    a, b = make_benchmark(seed=3), make_benchmark(seed=3)
    assert a.triples == b.triples and a.dataset == b.dataset
    assert len(a.triples) == 500
    write_benchmark(a, tmp_path)
    assert sum(1 for _ in open(tmp_path / "bench_kg.tsv")) == 500
    assert len((tmp_path / "bench_dataset.jsonl").read_text().splitlines()) == len(a.dataset)
