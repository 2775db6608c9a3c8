"""QA datasets, answer metrics and evaluation reports."""

from __future__ import annotations

import json
import logging
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import DatasetError

logger = logging.getLogger(__name__)

METRICS = ("hit1", "precision", "recall", "f1", "accuracy")


@dataclass(frozen=True)
class QAItem:
    id: str
    question: str
    gold_answers: tuple[str, ...]
    hops: int | None = None


def load_dataset(path) -> list[QAItem]:
    """Read a JSON Lines dataset with ``id``, ``question``, ``answers`` and optional ``hops``."""
    items: list[QAItem] = []
    seen: set[str] = set()
    try:
        fh = open(path, encoding="utf-8")
    except OSError as err:
        raise DatasetError(f"cannot open dataset {path}: {err}") from err
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise DatasetError(f"{path}:{lineno}: invalid JSON ({err.msg})") from err
            if not isinstance(obj, dict):
                raise DatasetError(f"{path}:{lineno}: expected a JSON object")
            qid, question, answers = obj.get("id"), obj.get("question"), obj.get("answers")
            if not isinstance(qid, str) or not qid:
                raise DatasetError(f"{path}:{lineno}: missing string 'id'")
            if qid in seen:
                raise DatasetError(f"{path}:{lineno}: duplicate id {qid!r}")
            if not isinstance(question, str) or not question.strip():
                raise DatasetError(f"{path}:{lineno}: missing 'question'")
            if (not isinstance(answers, list) or not answers
                    or not all(isinstance(a, str) for a in answers)):
                raise DatasetError(f"{path}:{lineno}: 'answers' must be a non-empty list of strings")
            hops = obj.get("hops")
            if hops is not None and (not isinstance(hops, int) or hops < 0):
                raise DatasetError(f"{path}:{lineno}: 'hops' must be a non-negative integer")
            seen.add(qid)
            items.append(QAItem(qid, question, tuple(answers), hops))
    return items


def normalize_answer(s: str) -> str:
    return " ".join(unicodedata.normalize("NFC", s).casefold().split())


def _norm_set(values: Iterable[str]) -> set[str]:
    return {n for n in (normalize_answer(v) for v in values) if n}


def hit_at_1(predictions: Iterable[str], gold: Iterable[str]) -> int:
    # one answer set per question, so "top-1" is the whole set
    return int(bool(_norm_set(predictions) & _norm_set(gold)))


def precision_recall_f1(predictions: Iterable[str], gold: Iterable[str]) -> tuple[float, float, float]:
    preds, golds = _norm_set(predictions), _norm_set(gold)
    hits = len(preds & golds)
    p = hits / len(preds) if preds else 0.0
    r = hits / len(golds) if golds else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def accuracy(predictions: Iterable[str], gold: Iterable[str]) -> float:
    """Correct predictions over the number of gold answers, i.e. identical to recall."""
    return precision_recall_f1(predictions, gold)[1]


@dataclass
class EvalRow:
    id: str
    question: str
    predictions: list[str]
    gold: list[str]
    hit1: int = 0
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    accuracy: float = 0.0
    error: str | None = None


def score_row(item: QAItem, predictions: Sequence[str], error: str | None = None) -> EvalRow:
    preds = list(dict.fromkeys(predictions))
    row = EvalRow(item.id, item.question, preds, list(item.gold_answers), error=error)
    if error is None:
        row.hit1 = hit_at_1(preds, item.gold_answers)
        row.precision, row.recall, row.f1 = precision_recall_f1(preds, item.gold_answers)
        row.accuracy = row.recall
    return row


@dataclass
class EvalReport:
    rows: list[EvalRow]
    metadata: dict = field(default_factory=dict)

    @property
    def macro(self) -> dict[str, float]:
        n = len(self.rows)
        return {m: (sum(getattr(r, m) for r in self.rows) / n if n else 0.0) for m in METRICS}

    def to_dict(self) -> dict:
        return {
            "metadata": dict(sorted(self.metadata.items())),
            "macro": self.macro,
            "count": len(self.rows),
            "errors": sum(1 for r in self.rows if r.error),
            "rows": [asdict(r) for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False, sort_keys=False) + "\n"

    def to_text(self) -> str:
        meta = "  ".join(f"{k}={v}" for k, v in sorted(self.metadata.items()))
        head = f"{'id':<12} {'hit1':>5} {'prec':>7} {'recall':>7} {'f1':>7} {'acc':>7}  note"
        lines = [meta, head, "-" * len(head)]
        for r in self.rows:
            note = r.error or ""
            lines.append(
                f"{r.id:<12} {r.hit1:>5d} {r.precision:>7.4f} {r.recall:>7.4f} {r.f1:>7.4f} {r.accuracy:>7.4f}  {note}".rstrip()
            )
        m = self.macro
        lines.append("-" * len(head))
        lines.append(
            f"{'macro':<12} {m['hit1']:>5.3f} {m['precision']:>7.4f} {m['recall']:>7.4f} {m['f1']:>7.4f} {m['accuracy']:>7.4f}"
        )
        return "\n".join(lines) + "\n"

    def to_tsv(self) -> str:
        lines = ["\t".join(("id",) + METRICS + ("error",))]
        for r in self.rows:
            lines.append("\t".join([r.id] + [f"{getattr(r, m):.6f}" for m in METRICS] + [r.error or ""]))
        return "\n".join(lines) + "\n"


def evaluate(
    dataset: Sequence[QAItem],
    runner: Callable[[QAItem], Sequence[str]],
    mode: str,
    *,
    workers: int = 1,
    metadata: dict | None = None,
) -> EvalReport:
    """Run ``runner`` on every item; a failing item yields an all-zero row with the error noted."""

    def one(item: QAItem) -> EvalRow:
        try:
            preds = runner(item)
        except Exception as err:  # noqa: BLE001 - every failure becomes a scored row
            logger.warning("question %s failed: %s", item.id, err)
            return score_row(item, [], error=f"{type(err).__name__}: {err}")
        return score_row(item, preds)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, dataset))
    else:
        rows = [one(item) for item in dataset]
    meta = {"mode": mode}
    meta.update(metadata or {})
    return EvalReport(rows, meta)
