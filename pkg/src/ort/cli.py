"""``ort`` command line: build-index, ask, eval, inspect-paths, stats."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import MODES, load_config, toy_config
from .errors import ConfigError, DataError, EmptyPathSetError, OrtError
from .evaluator import evaluate, load_dataset
from .kgstore import build_index, iter_triples, save_index
from .ontology import ontology_from_store, write_ontology
from .pipeline import Pipeline, make_gateway
from .plots import hop_histogram, plot_hop_histogram, plot_mode_comparison
from .reasoner import render_paths

logger = logging.getLogger("ort")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"ort: error[config]: {message}", file=sys.stderr)
        sys.exit(ConfigError.exit_code)


def _run_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run options")
    g.add_argument("--config", help="YAML config file (default: $ORT_CONFIG)")
    g.add_argument("--toy", action="store_true", help="use the bundled toy KG, dataset and mock fixtures")
    g.add_argument("--kg", help="triple file (TSV)")
    g.add_argument("--index", help="index cache built by build-index")
    g.add_argument("--mode", choices=MODES)
    g.add_argument("--max-pop", type=int, dest="max_pop")
    g.add_argument("--top-k", type=int, dest="top_k")
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--prompts", help="directory holding prompt templates")
    g.add_argument("--fixtures", help="mock fixture directory")
    g.add_argument("--backend", choices=("mock", "http"))
    g.add_argument("--empty-path-fallback", action="store_true", default=None,
                   help="answer without label paths instead of failing when none are found")
    return p


def _config(args):
    overrides = {k: getattr(args, k, None) for k in ("kg", "index", "mode", "max_pop", "top_k", "seed",
                                                     "workers", "prompts", "empty_path_fallback")}
    if getattr(args, "toy", False):
        cfg = toy_config()
        for key, value in overrides.items():
            if value is not None:
                setattr(cfg, key, value)
    else:
        cfg = load_config(args.config, overrides=overrides)
    if getattr(args, "fixtures", None):
        cfg.backend.fixtures = args.fixtures
    if getattr(args, "backend", None):
        cfg.backend.kind = args.backend
    return cfg.validate()


def cmd_build_index(args) -> int:
    problems: list = []
    try:
        fh = open(args.kg, "rb")
    except OSError as err:
        raise DataError(f"cannot open {args.kg}: {err}") from err
    with fh:
        store = build_index(iter_triples(fh, strict=args.strict, problems=problems),
                            strict=args.strict, problems=problems)
    save_index(store, args.out)
    ontology = ontology_from_store(store)
    onto_path = args.ontology_out or f"{args.out}.ontology.tsv"
    write_ontology(ontology, onto_path)
    summary = {
        "triples": store.triple_count,
        "entities": store.entity_count,
        "relations": store.relation_count,
        "labels": store.label_count,
        "abstract_triples": len(ontology),
        "warnings": len(problems),
    }
    print(" ".join(f"{k}={v}" for k, v in summary.items()))
    return 0


def cmd_ask(args) -> int:
    cfg = _config(args)
    pipeline = Pipeline(cfg, make_gateway(cfg))
    record = pipeline.ask(args.question)
    if args.json:
        print(json.dumps(record.to_dict(include_timings=args.timings), indent=2, ensure_ascii=False))
    else:
        sys.stdout.write(record.to_text())
    if args.record:
        Path(args.record).write_text(
            json.dumps(record.to_dict(include_timings=args.timings), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    dataset_path = args.dataset or cfg.dataset
    if not dataset_path:
        raise ConfigError("no dataset given")
    dataset = load_dataset(dataset_path)
    modes = list(MODES) if args.all_modes else [cfg.mode]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gateway = make_gateway(cfg)
    pipeline = Pipeline(cfg, gateway)
    macros = {}
    for mode in modes:
        meta = {
            "dataset": Path(dataset_path).name,
            "seed": cfg.seed,
            "max_pop": cfg.max_pop,
            "top_k": cfg.top_k,
            "cycle_order": cfg.cycle_order,
            "model": gateway.backend.model,
        }
        report = evaluate(
            dataset,
            lambda item, mode=mode: pipeline.ask(item.question, qid=item.id, mode=mode).answers,
            mode,
            workers=cfg.workers,
            metadata=meta,
        )
        (out / f"report-{mode}.json").write_text(report.to_json(), encoding="utf-8")
        (out / f"report-{mode}.txt").write_text(report.to_text(), encoding="utf-8")
        (out / f"report-{mode}.tsv").write_text(report.to_tsv(), encoding="utf-8")
        macros[mode] = report.macro
        m = report.macro
        print(f"{mode}\thit1={m['hit1']:.4f}\tprecision={m['precision']:.4f}\trecall={m['recall']:.4f}"
              f"\tf1={m['f1']:.4f}\terrors={sum(1 for r in report.rows if r.error)}")
    if not args.no_figure:
        plot_mode_comparison(macros, out / "metrics.png")
    return 0


def cmd_inspect_paths(args) -> int:
    cfg = _config(args)
    pipeline = Pipeline(cfg, make_gateway(cfg))
    try:
        record = pipeline.label_paths(args.question, max_pop=cfg.max_pop)
    except EmptyPathSetError as err:
        print(f"no label path found: {err}")
        return EmptyPathSetError.exit_code
    print(f"candidates ({len(record.rule_paths)}):")
    print(render_paths(record.rule_paths))
    print(f"\nselected ({len(record.selected_paths)}):")
    print(render_paths(record.selected_paths))
    return 0


def cmd_stats(args) -> int:
    cfg = _config(args)
    dataset_path = args.dataset or cfg.dataset
    if not dataset_path:
        raise ConfigError("no dataset given")
    counts = hop_histogram(item.hops for item in load_dataset(dataset_path))
    total = sum(counts.values())
    print("hops\tquestions\tpercent")
    for k, v in counts.items():
        print(f"{k}\t{v}\t{100 * v / total:.2f}")
    if args.out:
        plot_hop_histogram(counts, args.out, title=Path(dataset_path).stem)
    return 0


def build_parser() -> argparse.ArgumentParser:
    run = _run_options()
    parser = _Parser(prog="ort", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build-index", help="parse a triple file and write the index cache + ontology export")
    p.add_argument("kg")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--ontology-out")
    p.add_argument("--strict", action="store_true", help="fail on the first malformed line")
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("ask", parents=[run], help="answer one question")
    p.add_argument("question")
    p.add_argument("--json", action="store_true")
    p.add_argument("--timings", action="store_true", help="include per-stage timings in JSON output")
    p.add_argument("--record", help="also write the answer record JSON here")
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("eval", parents=[run], help="evaluate on a JSONL dataset")
    p.add_argument("dataset", nargs="?")
    p.add_argument("--out", default="reports")
    p.add_argument("--all-modes", action="store_true", help="sweep all four modes")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect-paths", parents=[run], help="show candidate and selected label paths")
    p.add_argument("question")
    p.set_defaults(func=cmd_inspect_paths)

    p = sub.add_parser("stats", parents=[run], help="question hop histogram")
    p.add_argument("dataset", nargs="?")
    p.add_argument("--out", help="write the histogram figure here")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 1), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OrtError as err:
        stage = getattr(err, "stage", None)
        where = f" stage={stage}" if stage else ""
        msg = str(err).replace("\n", " ")
        print(f"ort: error[{err.code}]{where}: {msg}", file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
