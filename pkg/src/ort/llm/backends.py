"""Chat-completion backends: HTTP, fixture-replay mock, scripted and recording."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Callable

import httpx

from ..errors import ConfigError, GatewayError, MockMissError, TransportError

logger = logging.getLogger(__name__)

API_KEY_ENV = "ORT_LLM_API_KEY"

Messages = list[dict[str, str]]


def canonical_prompt(messages: Messages) -> str:
    return json.dumps(messages, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def fixture_key(template: str, messages: Messages) -> str:
    """``<template>-<sha256 of the canonical message list>``."""
    digest = hashlib.sha256(canonical_prompt(messages).encode("utf-8")).hexdigest()
    return f"{template}-{digest}"


class ChatBackend(ABC):
    model: str = ""
    endpoint: str = ""

    @abstractmethod
    def send(self, messages: Messages, *, template: str) -> str:
        """Return the assistant text for ``messages``; raise TransportError on a retryable failure."""

    def describe(self) -> dict[str, str]:
        return {"backend": type(self).__name__, "model": self.model, "endpoint": self.endpoint}


class HttpBackend(ChatBackend):
    """OpenAI-style ``POST {model, messages}`` to a fixed URL with a bearer token."""

    def __init__(self, url: str, model: str, *, timeout: float = 60.0, api_key: str | None = None,
                 transport: httpx.BaseTransport | None = None):
        if not url:
            raise ConfigError("http backend needs a url")
        self.endpoint = url
        self.model = model
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def send(self, messages: Messages, *, template: str) -> str:
        try:
            resp = self._client.post(self.endpoint, json={"model": self.model, "messages": messages})
        except httpx.HTTPError as err:
            raise TransportError(f"{type(err).__name__}: {err}") from err
        if resp.status_code >= 500 or resp.status_code == 429:
            raise TransportError(f"HTTP {resp.status_code} from {self.endpoint}")
        if resp.status_code >= 400:
            raise GatewayError(f"HTTP {resp.status_code} from {self.endpoint}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as err:
            raise TransportError(f"unexpected response shape: {resp.text[:200]}") from err

    def close(self) -> None:
        self._client.close()


class MockBackend(ChatBackend):
    """Replays ``<fixture_dir>/<template>-<sha256>.txt`` verbatim."""

    model = "mock"

    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)
        self.endpoint = str(self.fixture_dir)

    def send(self, messages: Messages, *, template: str) -> str:
        key = fixture_key(template, messages)
        path = self.fixture_dir / f"{key}.txt"
        try:
            return path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise MockMissError(key) from None


class ScriptedBackend(ChatBackend):
    """Delegates to ``handler(template, messages) -> text``; for tests and synthetic runs."""

    model = "scripted"

    def __init__(self, handler: Callable[[str, Messages], str], name: str = "scripted"):
        self.handler = handler
        self.model = name

    def send(self, messages: Messages, *, template: str) -> str:
        return self.handler(template, messages)


class RecordingBackend(ChatBackend):
    """Forwards to ``inner`` and writes every exchange as a mock fixture."""

    def __init__(self, inner: ChatBackend, fixture_dir: str | Path):
        self.inner = inner
        self.fixture_dir = Path(fixture_dir)
        self.fixture_dir.mkdir(parents=True, exist_ok=True)
        self.model = inner.model
        self.endpoint = inner.endpoint

    def send(self, messages: Messages, *, template: str) -> str:
        text = self.inner.send(messages, template=template)
        path = self.fixture_dir / f"{fixture_key(template, messages)}.txt"
        path.write_text(text, encoding="utf-8", newline="\n")
        return text
