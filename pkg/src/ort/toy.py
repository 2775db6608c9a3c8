"""Scripted responder for the bundled toy dataset and the fixture recorder built on it.

``python -m ort.toy [DIR]`` regenerates the mock fixtures (default: the
packaged ``data/toy/mock`` directory).
"""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

from .config import MODES, toy_config, toy_dir
from .errors import OrtError
from .evaluator import load_dataset
from .llm.backends import RecordingBackend, ScriptedBackend
from .llm.gateway import answer_block, prompt_entity_paths, prompt_paths, prompt_question
from .llm.templates import GENERATE_ANSWER, RECOGNIZE, SEMANTIC_FILTER
from .pipeline import Pipeline, make_gateway

# extra non-default runs the fixtures must cover: (question id, max_pop)
EXTRA_INSPECT_RUNS = (("q01", 4),)


def load_script(path: Path | None = None) -> dict:
    path = path or toy_dir() / "toy_script.json"
    return json.loads(Path(path).read_text(encoding="utf-8"))


def toy_handler(script: dict):
    def handler(template: str, messages: list[dict]) -> str:
        prompt = messages[0]["content"]
        entry = script[prompt_question(prompt)]
        if template == RECOGNIZE:
            payload = {"conditions": entry["conditions"], "aims": entry["aims"]}
            return "```json\n" + json.dumps(payload, ensure_ascii=False) + "\n```\n"
        if template == SEMANTIC_FILTER:
            candidates = set(prompt_paths(prompt))
            return answer_block(p for p in entry["select"] if p in candidates)
        if template == GENERATE_ANSWER:
            return answer_block(entry["answers"] if prompt_entity_paths(prompt) else entry["direct"])
        raise KeyError(template)

    return handler


def record_toy_fixtures(out_dir: Path) -> int:
    """Run every mode over the toy dataset through a recorder; returns the fixture count."""
    out_dir = Path(out_dir)
    if out_dir.exists():
        shutil.rmtree(out_dir)
    cfg = toy_config()
    backend = RecordingBackend(ScriptedBackend(toy_handler(load_script()), name="toy-script"), out_dir)
    dataset = load_dataset(cfg.dataset)
    pipeline = Pipeline(cfg, make_gateway(cfg, backend))
    for mode in MODES:
        for item in dataset:
            try:
                pipeline.ask(item.question, qid=item.id, mode=mode)
            except OrtError:
                pass
    by_id = {item.id: item for item in dataset}
    for qid, max_pop in EXTRA_INSPECT_RUNS:
        pipeline.label_paths(by_id[qid].question, max_pop=max_pop)
    return len(list(out_dir.glob("*.txt")))


if __name__ == "__main__":  # pragma: no cover
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else toy_dir() / "mock"
    print(f"wrote {record_toy_fixtures(target)} fixtures to {target}")
