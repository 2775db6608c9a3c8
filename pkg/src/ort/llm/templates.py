"""Prompt templates shipped as editable text assets (``$name`` placeholders)."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from string import Template

from ..errors import ConfigError, MissingBindingError

RECOGNIZE = "recognize"
SEMANTIC_FILTER = "semantic_filter"
GENERATE_ANSWER = "generate_answer"
TEMPLATE_NAMES = (RECOGNIZE, SEMANTIC_FILTER, GENERATE_ANSWER)

REQUIRED_PLACEHOLDERS = {
    RECOGNIZE: {"question", "label_list"},
    SEMANTIC_FILTER: {"question", "paths"},
    GENERATE_ANSWER: {"question", "entity_paths"},
}


def _placeholders(body: str) -> list[str]:
    names = []
    for m in Template.pattern.finditer(body):
        name = m.group("named") or m.group("braced")
        if name:
            names.append(name)
        elif m.group("invalid") is not None:
            raise ConfigError(f"invalid placeholder syntax at offset {m.start()}")
    return names


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str

    def __post_init__(self):
        if self.name not in TEMPLATE_NAMES:
            raise ConfigError(f"unknown template name {self.name!r}")
        names = _placeholders(self.body)
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ConfigError(f"template {self.name!r} repeats placeholders: {', '.join(dupes)}")
        missing = REQUIRED_PLACEHOLDERS[self.name] - set(names)
        if missing:
            raise ConfigError(f"template {self.name!r} lacks placeholders: {', '.join(sorted(missing))}")

    @property
    def placeholders(self) -> list[str]:
        return _placeholders(self.body)


def render(template: PromptTemplate, bindings: dict) -> str:
    missing = [n for n in template.placeholders if n not in bindings]
    if missing:
        raise MissingBindingError(template.name, missing)
    return Template(template.body).substitute({k: str(v) for k, v in bindings.items()})


def load_templates(directory: str | Path | None = None) -> dict[str, PromptTemplate]:
    """Load the three templates from ``directory`` or from the packaged defaults."""
    out = {}
    for name in TEMPLATE_NAMES:
        if directory is None:
            body = resources.files("ort.data").joinpath("prompts", f"{name}.txt").read_text(encoding="utf-8")
        else:
            path = Path(directory) / f"{name}.txt"
            try:
                body = path.read_text(encoding="utf-8")
            except OSError as err:
                raise ConfigError(f"cannot read prompt template {path}: {err}") from err
        out[name] = PromptTemplate(name, body)
    return out
