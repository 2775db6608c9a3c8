from __future__ import annotations

import json
import threading
import time

import httpx
import pytest

from ort.errors import (
    ConfigError,
    GatewayError,
    LabelVocabularyError,
    MissingBindingError,
    MockMissError,
    ParseError,
    TransportError,
)
from ort.llm.backends import HttpBackend, MockBackend, RecordingBackend, ScriptedBackend, fixture_key
from ort.llm.gateway import (
    Gateway,
    filter_paths_semantic,
    generate_answer,
    parse_answers,
    parse_extraction,
    prompt_entity_paths,
    prompt_paths,
    prompt_question,
    recognize_aims_conditions,
)
from ort.llm.templates import GENERATE_ANSWER, RECOGNIZE, SEMANTIC_FILTER, PromptTemplate, load_templates, render
from ort.reasoner import LabelPath

RECOG_OK = '```json\n{"conditions": [["Lou Seal", "mascot"]], "aims": [["championship", "championship"]]}\n```'


def scripted(replies):
    """Backend returning ``replies`` in order; exception instances are raised instead."""
    it = iter(replies)
    calls = []

    def handler(template, messages):
        calls.append((template, messages))
        r = next(it)
        if isinstance(r, Exception):
            raise r
        return r

    backend = ScriptedBackend(handler)
    backend.calls = calls
    return backend


# ---------------------------------------------------------------- templates

def test_templates_load_and_render():
    t = load_templates()
    text = render(t[RECOGNIZE], {"question": "Who?", "label_list": "a, b"})
    assert "Question: Who?" in text and "a, b" in text


def test_template_missing_binding():
    with pytest.raises(MissingBindingError):
        render(load_templates()[RECOGNIZE], {"question": "x"})


def test_template_validation():
    with pytest.raises(ConfigError):
        PromptTemplate(RECOGNIZE, "Question: $question")
    with pytest.raises(ConfigError):
        PromptTemplate(RECOGNIZE, "$question $question $label_list")
    with pytest.raises(ConfigError):
        PromptTemplate("other", "$question")


def test_templates_from_directory(tmp_path):
    for name, body in ((RECOGNIZE, "Question: $question\n$label_list"),
                       (SEMANTIC_FILTER, "Question: $question\n$paths"),
                       (GENERATE_ANSWER, "Question: $question\n$entity_paths")):
        (tmp_path / f"{name}.txt").write_text(body)
    assert load_templates(tmp_path)[RECOGNIZE].body.startswith("Question")
    (tmp_path / f"{RECOGNIZE}.txt").unlink()
    with pytest.raises(ConfigError):
        load_templates(tmp_path)


def test_prompt_helpers_round_trip():
    t = load_templates()
    f = render(t[SEMANTIC_FILTER], {"question": "Q?", "paths": "a -> b\nc"})
    assert prompt_question(f) == "Q?" and prompt_paths(f) == ["a -> b", "c"]
    g = render(t[GENERATE_ANSWER], {"question": "Q?", "entity_paths": "reasoning path 1: [a] x"})
    assert prompt_entity_paths(g) == "reasoning path 1: [a] x"


# ---------------------------------------------------------------- parsing

def test_parse_extraction_variants():
    r = parse_extraction("sure!\n" + RECOG_OK)
    assert r.conditions == (("Lou Seal", "mascot"),)
    r = parse_extraction('```\n{"conditions": [{"entity": "x", "label": "a"}], "aims": [["y", "b"]]}\n```')
    assert r.labels() == {"a", "b"}
    for bad in ("no block", "```json\n[1]\n```", "```json\n{bad\n```", '```json\n{"conditions": [], "aims": []}\n```'):
        with pytest.raises(ParseError):
            parse_extraction(bad)


def test_parse_answers_strips_bullets_and_dedups():
    assert parse_answers("```\n- A\n2. B\nA\n```") == ["A", "B"]
    with pytest.raises(ParseError):
        parse_answers("```\n\n```")


# ---------------------------------------------------------------- gateway

def test_recognition_reprompts_once_on_unknown_label():
    bad = '```json\n{"conditions": [["Lou Seal", "masc"]], "aims": [["c", "championship"]]}\n```'
    backend = scripted([bad, RECOG_OK])
    r = Gateway(backend).recognize_aims_conditions("q", ["mascot", "championship"])
    assert r.conditions == (("Lou Seal", "mascot"),)
    second = backend.calls[1][1]
    assert len(second) == 3 and "masc" in second[-1]["content"]


def test_module_level_recognition_wraps_backend():
    r = recognize_aims_conditions("q", ["mascot", "championship"], scripted([RECOG_OK]))
    assert r.aims == (("championship", "championship"),)


def test_recognition_vocabulary_error_after_second_miss():
    bad = '```json\n{"conditions": [["x", "nope"]], "aims": [["c", "championship"]]}\n```'
    with pytest.raises(LabelVocabularyError) as info:
        Gateway(scripted([bad, bad])).recognize_aims_conditions("q", ["championship"])
    assert info.value.exit_code == 4


def test_parse_error_after_bounded_reprompts():
    backend = scripted(["garbage", "still garbage", RECOG_OK])
    with pytest.raises(ParseError):
        Gateway(backend, parse_attempts=2).recognize_aims_conditions("q", ["mascot", "championship"])
    assert len(backend.calls) == 2


def test_transport_retries_then_success_and_call_log():
    backend = scripted([TransportError("boom"), TransportError("boom"), RECOG_OK])
    gw = Gateway(backend, max_attempts=3)
    gw.recognize_aims_conditions("q", ["mascot", "championship"])
    assert [e["ok"] for e in gw.call_log] == [False, False, True]
    assert [e["attempt"] for e in gw.call_log] == [1, 2, 3]


def test_transport_gives_up():
    with pytest.raises(TransportError):
        Gateway(scripted([TransportError("x")] * 2), max_attempts=2).generate_answer("q", "")


def test_filter_subset_law_and_fallback():
    paths = [LabelPath(("a", "b")), LabelPath(("a", "c", "b")), LabelPath(("a", "d", "b"))]
    reply = "```\na -> d -> b\ninvented -> path\na -> b\n```"
    got = filter_paths_semantic("q", paths, scripted([reply]))
    assert got == [paths[0], paths[2]]  # input order, hallucination dropped
    assert filter_paths_semantic("q", paths, scripted(["```\nnothing\n```"])) == paths
    strict = Gateway(scripted(["```\nnothing\n```"]), fallback_on_empty_selection=False)
    assert strict.filter_paths_semantic("q", paths) == []


def test_generate_answer_empty_paths_uses_placeholder():
    backend = scripted(["```\nParis\n```"])
    assert generate_answer("q", "", backend) == ["Paris"]
    assert "(none)" in backend.calls[0][1][0]["content"]


def test_in_flight_cap():
    active, peak, lock = [0], [0], threading.Lock()

    def handler(template, messages):
        with lock:
            active[0] += 1
            peak[0] = max(peak[0], active[0])
        time.sleep(0.02)
        with lock:
            active[0] -= 1
        return "```\nok\n```"

    gw = Gateway(ScriptedBackend(handler), max_in_flight=2)
    threads = [threading.Thread(target=gw.generate_answer, args=("q", "")) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert peak[0] <= 2


# ---------------------------------------------------------------- backends

def test_mock_backend_miss_and_hit(tmp_path):
    messages = [{"role": "user", "content": "hi"}]
    with pytest.raises(MockMissError) as info:
        MockBackend(tmp_path).send(messages, template=RECOGNIZE)
    assert fixture_key(RECOGNIZE, messages) in str(info.value)
    rec = RecordingBackend(ScriptedBackend(lambda t, m: "hello"), tmp_path)
    rec.send(messages, template=RECOGNIZE)
    assert MockBackend(tmp_path).send(messages, template=RECOGNIZE) == "hello"


def test_fixture_key_is_stable():
    m = [{"role": "user", "content": "é"}]
    assert fixture_key("x", m) == fixture_key("x", json.loads(json.dumps(m)))
    assert fixture_key("x", m) != fixture_key("y", m)


def _http(handler):
    return HttpBackend("http://llm.test/v1/chat", "m", api_key="k", transport=httpx.MockTransport(handler))


def test_http_backend_success_and_auth_header():
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("authorization")
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json={"choices": [{"message": {"content": "```\nx\n```"}}]})

    backend = _http(handler)
    assert Gateway(backend).generate_answer("q", "") == ["x"]
    assert seen["auth"] == "Bearer k" and seen["body"]["model"] == "m"


def test_http_backend_retries_5xx():
    codes = iter([503, 429, 200])

    def handler(request):
        code = next(codes)
        if code != 200:
            return httpx.Response(code)
        return httpx.Response(200, json={"choices": [{"message": {"content": "```\nok\n```"}}]})

    gw = Gateway(_http(handler), max_attempts=3)
    assert gw.generate_answer("q", "") == ["ok"]
    assert len(gw.call_log) == 3


def test_http_backend_4xx_not_retried():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(401, text="denied")

    with pytest.raises(GatewayError) as info:
        Gateway(_http(handler), max_attempts=3).generate_answer("q", "")
    assert not isinstance(info.value, TransportError) and len(calls) == 1


def test_http_backend_connection_error_is_transport():
    def handler(request):
        raise httpx.ConnectError("refused")

    with pytest.raises(TransportError):
        _http(handler).send([{"role": "user", "content": "x"}], template=GENERATE_ANSWER)


def test_http_backend_needs_url():
    with pytest.raises(ConfigError):
        HttpBackend("", "m")
