"""End-to-end question answering: recognize, reason, filter, mine, generate."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from .config import FULL, NO_LLM_FILTER, NO_RULES, TRACE_FORWARD, RunConfig
from .errors import ConfigError, EmptyPathSetError, OrtError
from .kgstore import KgStore, build_index, iter_triples, load_index
from .llm.backends import ChatBackend, HttpBackend, MockBackend
from .llm.gateway import ExtractionResult, Gateway
from .llm.templates import load_templates
from .miner import EntityPath, format_paths, mine_paths
from .ontology import NeighborLabelDictionary, build_neighbor_dictionary, label_list, ontology_from_store
from .reasoner import LabelPath, reverse_reason, trace_forward

logger = logging.getLogger(__name__)


@dataclass
class AnswerRecord:
    question: str
    mode: str
    extraction: ExtractionResult | None = None
    rule_paths: list[LabelPath] | None = None
    selected_paths: list[LabelPath] | None = None
    entity_paths: list[EntityPath] = field(default_factory=list)
    reasoning_text: str = ""
    answers: list[str] = field(default_factory=list)
    stages: list[str] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)
    fallback: bool = False
    timings: dict[str, float] = field(default_factory=dict)

    def to_dict(self, *, include_timings: bool = False) -> dict:
        """Keys follow the case-study layout: Aims, Conditions, Rule_Paths, ..., Final_Answer."""
        out: dict = {"Question": self.question, "Mode": self.mode}
        if self.extraction is not None:
            out["Aims"] = [list(p) for p in self.extraction.aims]
            out["Conditions"] = [list(p) for p in self.extraction.conditions]
        if self.rule_paths is not None:
            out["Rule_Paths"] = [p.render() for p in self.rule_paths]
        if self.selected_paths is not None:
            out["Selected_Rule_Paths"] = [p.render() for p in self.selected_paths]
        if self.rule_paths is not None:
            out["Reasoning_Paths"] = self.reasoning_text.splitlines()
        out["Final_Answer"] = list(self.answers)
        out["Stages"] = list(self.stages)
        if self.fallback:
            out["Fallback"] = "no_rules"
        if self.diagnostics:
            out["Diagnostics"] = list(self.diagnostics)
        if include_timings:
            out["Timings"] = {k: round(v, 6) for k, v in self.timings.items()}
        return out

    def to_text(self) -> str:
        d = self.to_dict()
        lines = [f"Question:\n{self.question}"]
        for key in ("Aims", "Conditions"):
            if key in d:
                pairs = ", ".join(f'["{e}", "{label}"]' for e, label in d[key])
                lines.append(f"{key}:\n[{pairs}]")
        for key in ("Rule_Paths", "Selected_Rule_Paths", "Reasoning_Paths"):
            if key in d:
                lines.append(f"{key}:\n" + ("\n".join(d[key]) if d[key] else "(none)"))
        lines.append("Final_Answer:\n" + "\n".join(self.answers))
        return "\n\n".join(lines) + "\n"


class _Stage:
    def __init__(self, record: AnswerRecord, name: str):
        self.record, self.name = record, name

    def __enter__(self):
        self.record.stages.append(self.name)
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.record.timings[self.name] = time.perf_counter() - self.start
        if isinstance(exc, OrtError) and not getattr(exc, "stage", None):
            exc.stage = self.name
        return False


class Pipeline:
    """Composes the stages for one :class:`RunConfig`.

    The KG is loaded on first use, so ``no_rules`` runs never touch it.
    """

    def __init__(
        self,
        config: RunConfig,
        gateway: Gateway,
        store: KgStore | None = None,
        dictionary: NeighborLabelDictionary | None = None,
    ):
        self.config = config
        self.gateway = gateway
        self._store = store
        self._dictionary = dictionary
        self._labels: list[str] | None = None

    @property
    def store(self) -> KgStore:
        if self._store is None:
            self._store = load_store(self.config)
        return self._store

    @property
    def dictionary(self) -> NeighborLabelDictionary:
        if self._dictionary is None:
            self._dictionary = build_neighbor_dictionary(ontology_from_store(self.store))
        return self._dictionary

    @property
    def labels(self) -> list[str]:
        if self._labels is None:
            self._labels = label_list(self.dictionary)
        return self._labels

    def _answer_directly(self, record: AnswerRecord, question: str) -> AnswerRecord:
        with _Stage(record, "generate"):
            record.answers = self.gateway.generate_answer(question, "")
        return record

    def label_paths(self, question: str, *, mode: str | None = None, max_pop: int | None = None,
                    record: AnswerRecord | None = None) -> AnswerRecord:
        """Run recognition, path construction and (mode permitting) semantic filtering."""
        mode = mode or self.config.mode
        max_pop = max_pop or self.config.max_pop
        record = record or AnswerRecord(question, mode)
        with _Stage(record, "recognize"):
            record.extraction = self.gateway.recognize_aims_conditions(question, self.labels)
        intent = record.extraction.to_intent()
        if mode == TRACE_FORWARD:
            with _Stage(record, "trace_forward"):
                record.rule_paths = trace_forward(intent, self.dictionary, max_pop)
        else:
            with _Stage(record, "reverse_reason"):
                record.rule_paths = reverse_reason(
                    intent, self.dictionary, max_pop, cycle_order=self.config.cycle_order
                )
        if mode == NO_LLM_FILTER:
            record.selected_paths = list(record.rule_paths)
        else:
            with _Stage(record, "semantic_filter"):
                record.selected_paths = self.gateway.filter_paths_semantic(question, record.rule_paths)
        return record

    def ask(self, question: str, *, qid: str | None = None, max_pop: int | None = None,
            mode: str | None = None) -> AnswerRecord:
        mode = mode or self.config.mode
        record = AnswerRecord(question, mode)
        if mode == NO_RULES:
            return self._answer_directly(record, question)
        try:
            self.label_paths(question, mode=mode, max_pop=max_pop, record=record)
        except EmptyPathSetError as err:
            if not self.config.empty_path_fallback:
                raise
            logger.warning("%s; answering without label paths", err)
            record.fallback = True
            record.diagnostics.append(str(err))
            record.rule_paths = None
            return self._answer_directly(record, question)
        seed = f"{self.config.seed}:{qid if qid is not None else question}"
        with _Stage(record, "mine"):
            record.entity_paths, diags = mine_paths(
                self.store,
                self.dictionary,
                record.selected_paths,
                self.config.top_k,
                seed,
                record.extraction.to_intent().condition_entities,
            )
            record.diagnostics.extend(diags)
            record.reasoning_text = format_paths(record.entity_paths)
        with _Stage(record, "generate"):
            record.answers = self.gateway.generate_answer(question, record.reasoning_text)
        return record


def load_store(config: RunConfig) -> KgStore:
    if config.index and Path(config.index).exists():
        return load_index(config.index)
    if config.kg:
        problems: list = []
        with open(config.kg, "rb") as fh:
            store = build_index(iter_triples(fh, strict=config.strict, problems=problems), strict=config.strict)
        return store
    raise ConfigError("no knowledge graph configured (set 'kg' or 'index')")


def make_backend(config: RunConfig) -> ChatBackend:
    b = config.backend
    if b.kind == "mock":
        if not b.fixtures:
            raise ConfigError("mock backend needs 'backend.fixtures'")
        return MockBackend(b.fixtures)
    return HttpBackend(b.url, b.model, timeout=b.timeout)


def make_gateway(config: RunConfig, backend: ChatBackend | None = None) -> Gateway:
    b = config.backend
    return Gateway(
        backend or make_backend(config),
        load_templates(config.prompts),
        max_attempts=b.retries,
        parse_attempts=b.parse_attempts,
        max_in_flight=b.max_in_flight,
        backoff=b.backoff,
        fallback_on_empty_selection=config.fallback_on_empty_selection,
    )
