from .backends import ChatBackend, HttpBackend, MockBackend, RecordingBackend, ScriptedBackend, fixture_key
from .gateway import (
    ExtractionResult,
    Gateway,
    filter_paths_semantic,
    generate_answer,
    recognize_aims_conditions,
)
from .templates import PromptTemplate, load_templates, render

__all__ = [
    "ChatBackend",
    "ExtractionResult",
    "Gateway",
    "HttpBackend",
    "MockBackend",
    "PromptTemplate",
    "RecordingBackend",
    "ScriptedBackend",
    "filter_paths_semantic",
    "fixture_key",
    "generate_answer",
    "load_templates",
    "recognize_aims_conditions",
    "render",
]
