"""Every LLM exchange goes through :class:`Gateway`: render, send, retry, parse."""

from __future__ import annotations

import json
import logging
import re
import threading
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from ..errors import LabelVocabularyError, ParseError, TransportError
from ..reasoner import LabelPath, QueryIntent
from .backends import ChatBackend
from .templates import GENERATE_ANSWER, RECOGNIZE, SEMANTIC_FILTER, PromptTemplate, load_templates, render

logger = logging.getLogger(__name__)

_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
_BULLET = re.compile(r"^(?:[-*•]\s+|\d+[.)]\s+)")

NO_PATHS_TEXT = "(none)"


@dataclass(frozen=True)
class ExtractionResult:
    conditions: tuple[tuple[str, str], ...]
    aims: tuple[tuple[str, str], ...]

    def labels(self) -> set[str]:
        return {label for _, label in self.conditions + self.aims}

    def to_intent(self) -> QueryIntent:
        return QueryIntent(self.conditions, self.aims)

    def to_json(self) -> dict:
        return {"conditions": [list(p) for p in self.conditions], "aims": [list(p) for p in self.aims]}


def fenced_blocks(text: str) -> list[str]:
    return _FENCE.findall(text)


def _block_lines(block: str) -> list[str]:
    lines = []
    for line in block.splitlines():
        line = _BULLET.sub("", line.strip()).strip()
        if line:
            lines.append(line)
    return lines


def _pairs(value, key: str, raw: str) -> tuple[tuple[str, str], ...]:
    if not isinstance(value, list) or not value:
        raise ParseError(f"{key!r} must be a non-empty list of [entity, label] pairs", raw)
    out = []
    for item in value:
        if isinstance(item, dict):
            item = [item.get("entity"), item.get("label")]
        if (not isinstance(item, (list, tuple)) or len(item) != 2
                or not all(isinstance(x, str) and x.strip() for x in item)):
            raise ParseError(f"bad {key!r} entry {item!r}", raw)
        out.append((item[0].strip(), item[1].strip()))
    return tuple(out)


def parse_extraction(raw: str) -> ExtractionResult:
    blocks = fenced_blocks(raw)
    if not blocks:
        raise ParseError("no fenced block in recognition output", raw)
    try:
        data = json.loads(blocks[-1])
    except json.JSONDecodeError as err:
        raise ParseError(f"recognition block is not JSON: {err}", raw) from err
    if not isinstance(data, dict):
        raise ParseError("recognition block must be a JSON object", raw)
    return ExtractionResult(_pairs(data.get("conditions"), "conditions", raw), _pairs(data.get("aims"), "aims", raw))


def parse_path_selection(raw: str) -> list[str]:
    blocks = fenced_blocks(raw)
    if not blocks:
        raise ParseError("no fenced block in path selection output", raw)
    return _block_lines(blocks[-1])


def parse_answers(raw: str) -> list[str]:
    blocks = fenced_blocks(raw)
    if not blocks:
        raise ParseError("no fenced block in answer output", raw)
    answers = list(dict.fromkeys(_block_lines(blocks[-1])))
    if not answers:
        raise ParseError("answer block is empty", raw)
    return answers


class Gateway:
    """Owns prompt rendering, bounded retries and output validation.

    ``max_attempts`` bounds transport attempts per exchange; ``parse_attempts``
    bounds how many times an unparseable reply is re-requested. At most
    ``max_in_flight`` exchanges run concurrently.
    """

    def __init__(
        self,
        backend: ChatBackend,
        templates: dict[str, PromptTemplate] | None = None,
        *,
        max_attempts: int = 3,
        parse_attempts: int = 2,
        max_in_flight: int = 4,
        backoff: float = 0.0,
        fallback_on_empty_selection: bool = True,
    ):
        self.backend = backend
        self.templates = templates or load_templates()
        self.max_attempts = max(1, max_attempts)
        self.parse_attempts = max(1, parse_attempts)
        self.backoff = backoff
        self.fallback_on_empty_selection = fallback_on_empty_selection
        self._slots = threading.BoundedSemaphore(max(1, max_in_flight))
        self._log_lock = threading.Lock()
        self.call_log: list[dict] = []

    def _log(self, **entry) -> None:
        with self._log_lock:
            self.call_log.append(entry)

    def _exchange(self, template: str, messages: list[dict]) -> str:
        last: TransportError | None = None
        for attempt in range(1, self.max_attempts + 1):
            with self._slots:
                try:
                    text = self.backend.send(messages, template=template)
                except TransportError as err:
                    last = err
                    self._log(template=template, attempt=attempt, ok=False, error=str(err))
                    logger.warning("%s attempt %d/%d failed: %s", template, attempt, self.max_attempts, err)
                else:
                    self._log(template=template, attempt=attempt, ok=True)
                    return text
            if self.backoff and attempt < self.max_attempts:
                time.sleep(self.backoff * attempt)
        raise TransportError(f"{template}: gave up after {self.max_attempts} attempts: {last}")

    def _ask(self, template: str, messages: list[dict], parse: Callable[[str], object]):
        err: ParseError | None = None
        for _ in range(self.parse_attempts):
            raw = self._exchange(template, messages)
            try:
                return parse(raw), raw
            except ParseError as exc:
                err = exc
                logger.warning("%s: unparseable reply: %s", template, exc)
        raise err

    def _messages(self, template: str, bindings: dict) -> list[dict]:
        return [{"role": "user", "content": render(self.templates[template], bindings)}]

    def recognize_aims_conditions(self, question: str, label_list: Sequence[str]) -> ExtractionResult:
        if not label_list:
            raise ValueError("label_list is empty")
        vocab = set(label_list)
        messages = self._messages(RECOGNIZE, {"question": question, "label_list": ", ".join(label_list)})
        result, raw = self._ask(RECOGNIZE, messages, parse_extraction)
        bad = result.labels() - vocab
        if not bad:
            return result
        correction = (
            f"These labels are not in the label list: {', '.join(sorted(bad))}. "
            "Answer again using only labels copied exactly from the label list, in the same fenced JSON format."
        )
        messages = messages + [{"role": "assistant", "content": raw}, {"role": "user", "content": correction}]
        result, raw = self._ask(RECOGNIZE, messages, parse_extraction)
        bad = result.labels() - vocab
        if bad:
            raise LabelVocabularyError(bad, raw)
        return result

    def filter_paths_semantic(self, question: str, paths: Sequence[LabelPath]) -> list[LabelPath]:
        """Subset of ``paths`` the model judged useful, in input order."""
        if not paths:
            raise ValueError("no paths to filter")
        rendered = [p.render() for p in paths]
        messages = self._messages(SEMANTIC_FILTER, {"question": question, "paths": "\n".join(rendered)})
        chosen, _ = self._ask(SEMANTIC_FILTER, messages, parse_path_selection)
        known = set(rendered)
        for line in chosen:
            if line not in known:
                logger.warning("semantic filter returned a path not among the candidates: %r", line)
        picked = set(chosen) & known
        selected = [p for p, text in zip(paths, rendered) if text in picked]
        if not selected and self.fallback_on_empty_selection:
            logger.warning("semantic filter selected nothing; keeping all %d candidates", len(paths))
            return list(paths)
        return selected

    def generate_answer(self, question: str, entity_paths: str) -> list[str]:
        text = entity_paths if entity_paths.strip() else NO_PATHS_TEXT
        messages = self._messages(GENERATE_ANSWER, {"question": question, "entity_paths": text})
        answers, _ = self._ask(GENERATE_ANSWER, messages, parse_answers)
        return answers


def _as_gateway(backend_or_gateway) -> Gateway:
    return backend_or_gateway if isinstance(backend_or_gateway, Gateway) else Gateway(backend_or_gateway)


def recognize_aims_conditions(question: str, label_list: Sequence[str], backend) -> ExtractionResult:
    return _as_gateway(backend).recognize_aims_conditions(question, label_list)


def filter_paths_semantic(question: str, paths: Sequence[LabelPath], backend) -> list[LabelPath]:
    return _as_gateway(backend).filter_paths_semantic(question, paths)


def generate_answer(question: str, entity_paths: str, backend) -> list[str]:
    return _as_gateway(backend).generate_answer(question, entity_paths)


def prompt_question(text: str) -> str | None:
    """Recover the question from a rendered prompt (scripted backends key on it)."""
    m = re.search(r"^Question: (.*)$", text, re.MULTILINE)
    return m.group(1) if m else None


def prompt_paths(text: str) -> list[str]:
    """Candidate paths from a rendered semantic-filter prompt."""
    blocks = fenced_blocks(text)
    return _block_lines(blocks[0]) if blocks else []


def prompt_entity_paths(text: str) -> str:
    m = re.search(r"^Reasoning paths:\n(.*?)\n\nGive only", text, re.MULTILINE | re.DOTALL)
    if not m or m.group(1).strip() == NO_PATHS_TEXT:
        return ""
    return m.group(1)


def answer_block(answers: Iterable[str]) -> str:
    return "```\n" + "\n".join(answers) + "\n```\n"
