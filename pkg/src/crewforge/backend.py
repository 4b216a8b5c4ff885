"""LLM invocation backends: deterministic scripted replay and live HTTP chat.

Both speak the same ``complete(ChatRequest) -> ChatResponse`` interface and
both append one record per invocation (success or failure) to a call log, so
a session's behavior can always be reconstructed from disk.
"""
from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Protocol, Sequence

import httpx
import yaml

from .errors import (
    HttpStatus,
    HttpTimeout,
    MalformedResponse,
    ScriptExhausted,
    ScriptMismatch,
)

FRAMEWORK = "framework"
MODEL = "model"


@dataclass(frozen=True)
class Turn:
    speaker: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    system: str
    turns: tuple[Turn, ...]
    max_tokens: int = 1024
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        for i, turn in enumerate(self.turns):
            expected = FRAMEWORK if i % 2 == 0 else MODEL
            if turn.speaker != expected:
                raise ValueError(
                    f"turns must alternate speakers starting with {FRAMEWORK!r}"
                )

    def last_framework_turn(self) -> str:
        for turn in reversed(self.turns):
            if turn.speaker == FRAMEWORK:
                return turn.content
        return ""


@dataclass(frozen=True)
class ChatResponse:
    content: str
    prompt_units: int
    completion_units: int
    latency_ms: int


class ChatBackend(Protocol):
    def complete(self, req: ChatRequest) -> ChatResponse: ...


class CallLog:
    """Append-only invocation log, optionally mirrored to an ndjson file."""

    def __init__(self, path: str | None = None):
        self.path = path
        self.records: list[dict[str, Any]] = []

    def append(self, record: dict[str, Any]) -> None:
        self.records.append(record)
        if self.path:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    def __len__(self) -> int:
        return len(self.records)


def _logged(
    log: CallLog | None,
    backend_name: str,
    req: ChatRequest,
    run: Callable[[], ChatResponse],
) -> ChatResponse:
    record: dict[str, Any] = {
        "backend": backend_name,
        "system": req.system,
        "turns": [{"speaker": t.speaker, "content": t.content} for t in req.turns],
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    }
    try:
        resp = run()
    except Exception as exc:
        record.update(response=None, error=f"{type(exc).__name__}: {exc}")
        if log is not None:
            log.append(record)
        raise
    record.update(
        response=resp.content,
        error=None,
        latency_ms=resp.latency_ms,
        usage={"prompt_units": resp.prompt_units, "completion_units": resp.completion_units},
    )
    if log is not None:
        log.append(record)
    return resp


def _units(text: str) -> int:
    # crude but monotone: ~4 characters per unit, minimum 1
    return max(1, math.ceil(len(text) / 4))


@dataclass(frozen=True)
class ScriptEntry:
    response: str
    match: str | None = None


class ScriptedBackend:
    """Replays canned responses in order; optional substring guards verify
    that the framework is asking what the script author expected."""

    def __init__(self, entries: Sequence[ScriptEntry], log: CallLog | None = None):
        self.entries = list(entries)
        self.cursor = 0
        self.log = log

    def complete(self, req: ChatRequest) -> ChatResponse:
        def run() -> ChatResponse:
            if self.cursor >= len(self.entries):
                raise ScriptExhausted(self.cursor)
            entry = self.entries[self.cursor]
            last = req.last_framework_turn()
            if entry.match and entry.match not in last:
                raise ScriptMismatch(entry.match, last)
            self.cursor += 1
            prompt_text = req.system + "".join(t.content for t in req.turns)
            return ChatResponse(
                content=entry.response,
                prompt_units=_units(prompt_text),
                completion_units=_units(entry.response),
                latency_ms=0,
            )

        return _logged(self.log, "scripted", req, run)


def load_script(path: str) -> list[ScriptEntry]:
    """Read script entries from YAML: a list of {match?, response} mappings
    (or a mapping with a ``script`` list)."""
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if isinstance(data, Mapping) and "script" in data:
        data = data["script"]
    if not isinstance(data, list):
        raise ValueError(f"{path}: expected a list of script entries")
    entries = []
    for item in data:
        if not isinstance(item, Mapping) or "response" not in item:
            raise ValueError(f"{path}: each entry needs a 'response' key")
        entries.append(
            ScriptEntry(response=str(item["response"]), match=item.get("match"))
        )
    return entries


class HttpChatBackend:
    """Minimal chat-completions client with bounded retries.

    Request body: {model, messages, temperature, max_tokens}; response body:
    {choices: [{message: {content}}], usage}. Retries twice with exponential
    backoff on timeouts, connection errors, and 5xx; never on 4xx.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        timeout_ms: int = 30_000,
        api_key_env: str = "CREWFORGE_API_KEY",
        max_retries: int = 2,
        backoff_s: float = 0.5,
        log: CallLog | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.timeout_s = timeout_ms / 1000.0
        self.api_key_env = api_key_env
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self.log = log
        self._sleep = sleep

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _body(self, req: ChatRequest) -> dict[str, Any]:
        messages = [{"role": "system", "content": req.system}]
        for turn in req.turns:
            role = "user" if turn.speaker == FRAMEWORK else "assistant"
            messages.append({"role": role, "content": turn.content})
        return {
            "model": self.model,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }

    def _call_once(self, body: dict[str, Any]) -> ChatResponse:
        start = time.perf_counter()
        try:
            resp = httpx.post(
                f"{self.base_url}/chat/completions",
                json=body,
                headers=self._headers(),
                timeout=self.timeout_s,
            )
        except httpx.TransportError as exc:
            # timeouts and connection-level failures are equally transient
            raise HttpTimeout(str(exc)) from exc
        latency_ms = int((time.perf_counter() - start) * 1000)
        if resp.status_code != 200:
            raise HttpStatus(resp.status_code, resp.text)
        try:
            data = resp.json()
            content = data["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise MalformedResponse(f"cannot extract content: {exc}") from exc
        if content is None:
            raise MalformedResponse("null content")
        usage = data.get("usage") or {}
        return ChatResponse(
            content=str(content),
            prompt_units=int(usage.get("prompt_tokens", 0)),
            completion_units=int(usage.get("completion_tokens", 0)),
            latency_ms=latency_ms,
        )

    def complete(self, req: ChatRequest) -> ChatResponse:
        def run() -> ChatResponse:
            body = self._body(req)
            attempt = 0
            while True:
                try:
                    return self._call_once(body)
                except (HttpTimeout, HttpStatus) as exc:
                    retriable = not (isinstance(exc, HttpStatus) and exc.code < 500)
                    if not retriable or attempt >= self.max_retries:
                        raise
                    self._sleep(self.backoff_s * (2**attempt))
                    attempt += 1

        return _logged(self.log, "http", req, run)
