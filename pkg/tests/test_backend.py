"""Backend tests: request validation, scripted replay, call logging, HTTP retries."""
from __future__ import annotations

import json
import math

import httpx
import pytest

import crewforge.backend as backend_mod
from crewforge.backend import (
    CallLog,
    ChatRequest,
    ChatResponse,
    HttpChatBackend,
    ScriptedBackend,
    ScriptEntry,
    Turn,
    load_script,
)
from crewforge.errors import (
    HttpStatus,
    HttpTimeout,
    MalformedResponse,
    ScriptExhausted,
    ScriptMismatch,
)


def req(*contents: str, **kwargs) -> ChatRequest:
    """Build a request whose turns alternate framework/model automatically."""
    speakers = ["framework", "model"]
    turns = tuple(
        Turn(speaker=speakers[i % 2], content=c) for i, c in enumerate(contents)
    )
    return ChatRequest(system="sys", turns=turns, **kwargs)


# --- ChatRequest validation ---


def test_request_alternation_accepted():
    r = req("ask", "answer", "follow-up")
    assert [t.speaker for t in r.turns] == ["framework", "model", "framework"]


def test_request_must_start_with_framework():
    with pytest.raises(ValueError, match="alternate"):
        ChatRequest(system="s", turns=(Turn("model", "hi"),))


def test_request_rejects_consecutive_framework_turns():
    turns = (Turn("framework", "a"), Turn("framework", "b"))
    with pytest.raises(ValueError, match="alternate"):
        ChatRequest(system="s", turns=turns)


def test_request_rejects_bad_budgets():
    with pytest.raises(ValueError, match="max_tokens"):
        req("x", max_tokens=0)
    with pytest.raises(ValueError, match="temperature"):
        req("x", temperature=-0.01)


def test_last_framework_turn_picks_latest():
    assert req("first", "reply", "second").last_framework_turn() == "second"
    assert ChatRequest(system="s", turns=()).last_framework_turn() == ""


# --- scripted backend ---


def test_scripted_replays_in_order():
    be = ScriptedBackend([ScriptEntry("one"), ScriptEntry("two")])
    assert be.complete(req("a")).content == "one"
    assert be.complete(req("b")).content == "two"
    assert be.cursor == 2


def test_scripted_match_guard_checks_last_framework_turn():
    be = ScriptedBackend([ScriptEntry("ok", match="plan")])
    # the guard looks at the latest framework turn, not the whole history
    resp = be.complete(req("write a plan", "draft", "revise the plan"))
    assert resp.content == "ok"


def test_scripted_mismatch_raises_and_keeps_cursor():
    be = ScriptedBackend([ScriptEntry("ok", match="plan")])
    with pytest.raises(ScriptMismatch) as err:
        be.complete(req("write some code"))
    assert err.value.expected_pattern == "plan"
    assert be.cursor == 0
    # the entry is still available for a prompt that does match
    assert be.complete(req("write a plan")).content == "ok"


def test_scripted_exhaustion():
    be = ScriptedBackend([ScriptEntry("only")])
    be.complete(req("a"))
    with pytest.raises(ScriptExhausted) as err:
        be.complete(req("b"))
    assert err.value.cursor == 1


def test_scripted_usage_units():
    be = ScriptedBackend([ScriptEntry("12345678")])
    r = req("abc", "de", "f")
    resp = be.complete(r)
    prompt_text = "sys" + "abc" + "de" + "f"
    assert resp.prompt_units == math.ceil(len(prompt_text) / 4)
    assert resp.completion_units == 2
    assert resp.latency_ms == 0


def test_scripted_empty_response_still_costs_one_unit():
    be = ScriptedBackend([ScriptEntry("")])
    assert be.complete(req("a")).completion_units == 1


# --- script files ---


def test_load_script_list_form(tmp_path):
    path = tmp_path / "script.yaml"
    path.write_text(
        "- match: plan\n  response: the plan\n- response: unguarded\n",
        encoding="utf-8",
    )
    entries = load_script(str(path))
    assert entries == [
        ScriptEntry(response="the plan", match="plan"),
        ScriptEntry(response="unguarded", match=None),
    ]


def test_load_script_mapping_form(tmp_path):
    path = tmp_path / "script.yaml"
    path.write_text("script:\n  - response: hello\n", encoding="utf-8")
    assert load_script(str(path)) == [ScriptEntry(response="hello")]


def test_load_script_rejects_non_list(tmp_path):
    path = tmp_path / "script.yaml"
    path.write_text("just a string\n", encoding="utf-8")
    with pytest.raises(ValueError, match="list"):
        load_script(str(path))


def test_load_script_rejects_entry_without_response(tmp_path):
    path = tmp_path / "script.yaml"
    path.write_text("- match: plan\n", encoding="utf-8")
    with pytest.raises(ValueError, match="response"):
        load_script(str(path))


# --- call log ---


def test_call_log_records_success():
    log = CallLog()
    be = ScriptedBackend([ScriptEntry("out")], log=log)
    be.complete(req("in"))
    assert len(log) == 1
    rec = log.records[0]
    assert rec["backend"] == "scripted"
    assert rec["system"] == "sys"
    assert rec["turns"] == [{"speaker": "framework", "content": "in"}]
    assert rec["response"] == "out"
    assert rec["error"] is None
    assert rec["usage"] == {"prompt_units": 2, "completion_units": 1}


def test_call_log_records_failures_too():
    log = CallLog()
    be = ScriptedBackend([ScriptEntry("out", match="plan")], log=log)
    with pytest.raises(ScriptMismatch):
        be.complete(req("code please"))
    be.complete(req("plan please"))
    assert len(log) == 2
    failed, ok = log.records
    assert failed["response"] is None
    assert failed["error"].startswith("ScriptMismatch:")
    assert ok["error"] is None


def test_call_log_mirrors_to_ndjson(tmp_path):
    path = tmp_path / "calls.ndjson"
    log = CallLog(path=str(path))
    be = ScriptedBackend([ScriptEntry("a"), ScriptEntry("b")], log=log)
    be.complete(req("1"))
    be.complete(req("2"))
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    assert [json.loads(line)["response"] for line in lines] == ["a", "b"]


# --- HTTP backend ---


class FakeResponse:
    def __init__(self, status_code=200, payload=None, text="", raw_invalid=False):
        self.status_code = status_code
        self._payload = payload
        self.text = text
        self._raw_invalid = raw_invalid

    def json(self):
        if self._raw_invalid:
            raise ValueError("not json")
        return self._payload


def ok_payload(content="hello", prompt=7, completion=3):
    return {
        "choices": [{"message": {"content": content}}],
        "usage": {"prompt_tokens": prompt, "completion_tokens": completion},
    }


class FakePost:
    """Stands in for httpx.post; pops one scripted outcome per call."""

    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.calls: list[dict] = []

    def __call__(self, url, *, json, headers, timeout):
        self.calls.append(
            {"url": url, "json": json, "headers": headers, "timeout": timeout}
        )
        outcome = self.outcomes.pop(0)
        if isinstance(outcome, Exception):
            raise outcome
        return outcome


@pytest.fixture()
def http_backend(monkeypatch):
    """Factory: wire an HttpChatBackend to scripted outcomes and a fake clock."""

    def make(outcomes, **kwargs):
        post = FakePost(outcomes)
        sleeps: list[float] = []
        monkeypatch.setattr(backend_mod.httpx, "post", post)
        be = HttpChatBackend(
            base_url="http://llm.test/v1/",
            model="m-1",
            sleep=sleeps.append,
            **kwargs,
        )
        return be, post, sleeps

    return make


def test_http_success_maps_response(http_backend):
    be, post, sleeps = http_backend([FakeResponse(payload=ok_payload())])
    resp = be.complete(req("hi"))
    assert isinstance(resp, ChatResponse)
    assert resp.content == "hello"
    assert (resp.prompt_units, resp.completion_units) == (7, 3)
    assert resp.latency_ms >= 0
    assert sleeps == []
    assert post.calls[0]["url"] == "http://llm.test/v1/chat/completions"


def test_http_request_body_shape(http_backend):
    be, post, _ = http_backend([FakeResponse(payload=ok_payload())])
    be.complete(req("ask", "answer", "again", max_tokens=64, temperature=0.5))
    body = post.calls[0]["json"]
    assert body["model"] == "m-1"
    assert body["max_tokens"] == 64
    assert body["temperature"] == 0.5
    assert [m["role"] for m in body["messages"]] == [
        "system",
        "user",
        "assistant",
        "user",
    ]
    assert body["messages"][0]["content"] == "sys"


def test_http_api_key_header(http_backend, monkeypatch):
    monkeypatch.setenv("CREWFORGE_API_KEY", "sk-test")
    be, post, _ = http_backend([FakeResponse(payload=ok_payload())])
    be.complete(req("hi"))
    assert post.calls[0]["headers"]["Authorization"] == "Bearer sk-test"


def test_http_no_key_means_no_auth_header(http_backend, monkeypatch):
    monkeypatch.delenv("CREWFORGE_API_KEY", raising=False)
    be, post, _ = http_backend([FakeResponse(payload=ok_payload())])
    be.complete(req("hi"))
    assert "Authorization" not in post.calls[0]["headers"]


def test_http_retries_timeouts_with_backoff(http_backend):
    be, post, sleeps = http_backend(
        [
            httpx.ConnectTimeout("slow"),
            httpx.ConnectError("refused"),
            FakeResponse(payload=ok_payload("third time")),
        ]
    )
    assert be.complete(req("hi")).content == "third time"
    assert len(post.calls) == 3
    assert sleeps == [0.5, 1.0]


def test_http_gives_up_after_max_retries(http_backend):
    be, post, sleeps = http_backend([httpx.ReadTimeout("t")] * 3)
    with pytest.raises(HttpTimeout):
        be.complete(req("hi"))
    assert len(post.calls) == 3
    assert sleeps == [0.5, 1.0]


def test_http_retries_5xx(http_backend):
    be, post, sleeps = http_backend(
        [
            FakeResponse(status_code=503, text="overloaded"),
            FakeResponse(payload=ok_payload()),
        ]
    )
    assert be.complete(req("hi")).content == "hello"
    assert len(post.calls) == 2
    assert sleeps == [0.5]


def test_http_never_retries_4xx(http_backend):
    be, post, sleeps = http_backend([FakeResponse(status_code=401, text="no key")])
    with pytest.raises(HttpStatus) as err:
        be.complete(req("hi"))
    assert err.value.code == 401
    assert len(post.calls) == 1
    assert sleeps == []


def test_http_transport_error_surfaces_as_timeout(http_backend):
    be, _, _ = http_backend([httpx.ConnectError("refused")] * 3)
    with pytest.raises(HttpTimeout, match="refused"):
        be.complete(req("hi"))


def test_http_malformed_json_not_retried(http_backend):
    be, post, sleeps = http_backend([FakeResponse(raw_invalid=True)])
    with pytest.raises(MalformedResponse):
        be.complete(req("hi"))
    assert len(post.calls) == 1
    assert sleeps == []


def test_http_missing_choices_is_malformed(http_backend):
    be, _, _ = http_backend([FakeResponse(payload={"choices": []})])
    with pytest.raises(MalformedResponse):
        be.complete(req("hi"))


def test_http_null_content_is_malformed(http_backend):
    payload = {"choices": [{"message": {"content": None}}]}
    be, _, _ = http_backend([FakeResponse(payload=payload)])
    with pytest.raises(MalformedResponse):
        be.complete(req("hi"))


def test_http_missing_usage_defaults_to_zero(http_backend):
    payload = {"choices": [{"message": {"content": "x"}}]}
    be, _, _ = http_backend([FakeResponse(payload=payload)])
    resp = be.complete(req("hi"))
    assert (resp.prompt_units, resp.completion_units) == (0, 0)


def test_http_logs_one_record_per_invocation(http_backend, tmp_path):
    # a retried call is still a single invocation: one log record at the end
    log = CallLog(path=str(tmp_path / "calls.ndjson"))
    be, post, _ = http_backend(
        [httpx.ReadTimeout("t"), FakeResponse(payload=ok_payload())], log=log
    )
    be.complete(req("hi"))
    assert len(post.calls) == 2
    assert len(log) == 1
    assert log.records[0]["error"] is None

    be2, _, _ = http_backend([FakeResponse(status_code=400, text="bad")], log=log)
    with pytest.raises(HttpStatus):
        be2.complete(req("hi"))
    assert len(log) == 2
    assert log.records[1]["error"].startswith("HttpStatus:")


def test_http_timeout_seconds_passed_through(http_backend):
    be, post, _ = http_backend(
        [FakeResponse(payload=ok_payload())], timeout_ms=2500
    )
    be.complete(req("hi"))
    assert post.calls[0]["timeout"] == pytest.approx(2.5)
