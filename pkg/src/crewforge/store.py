"""On-disk session tree: transcripts, call logs, reports, artifacts.

Layout per session:

    sessions/<id>/
      taskspec.yaml        what the user asked for
      config.yaml          resolved session configuration
      transcript.ndjson    one Message per line, seq order
      calls.ndjson         raw backend invocations
      reports/             numbered test/tuning report documents
      final.policy         canonical policy text, written on acceptance
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

import yaml

from .backend import CallLog
from .roles import Message, MessageKind


@dataclass(frozen=True)
class SessionPaths:
    root: str

    @property
    def taskspec(self) -> str:
        return os.path.join(self.root, "taskspec.yaml")

    @property
    def config(self) -> str:
        return os.path.join(self.root, "config.yaml")

    @property
    def transcript(self) -> str:
        return os.path.join(self.root, "transcript.ndjson")

    @property
    def calls(self) -> str:
        return os.path.join(self.root, "calls.ndjson")

    @property
    def reports_dir(self) -> str:
        return os.path.join(self.root, "reports")

    @property
    def final_policy(self) -> str:
        return os.path.join(self.root, "final.policy")


class SessionStore:
    """Filesystem persistence for sessions under one root directory."""

    def __init__(self, root: str):
        self.root = root

    def paths(self, session_id: str) -> SessionPaths:
        return SessionPaths(os.path.join(self.root, session_id))

    def create(self, session_id: str) -> SessionPaths:
        paths = self.paths(session_id)
        os.makedirs(paths.reports_dir, exist_ok=True)
        return paths

    def exists(self, session_id: str) -> bool:
        return os.path.isfile(self.paths(session_id).transcript)

    def list_sessions(self) -> list[str]:
        if not os.path.isdir(self.root):
            return []
        return sorted(
            name
            for name in os.listdir(self.root)
            if os.path.isfile(self.paths(name).transcript)
        )

    def call_log(self, session_id: str) -> CallLog:
        return CallLog(path=self.create(session_id).calls)

    def write_taskspec(self, session_id: str, spec_dict: Mapping[str, Any]) -> None:
        with open(self.create(session_id).taskspec, "w", encoding="utf-8") as fh:
            yaml.safe_dump(dict(spec_dict), fh, sort_keys=False)

    def write_config(self, session_id: str, config_dict: Mapping[str, Any]) -> None:
        with open(self.create(session_id).config, "w", encoding="utf-8") as fh:
            yaml.safe_dump(dict(config_dict), fh, sort_keys=False)

    def append_messages(self, session_id: str, messages: Iterable[Message]) -> None:
        paths = self.create(session_id)
        with open(paths.transcript, "a", encoding="utf-8") as fh:
            for msg in messages:
                fh.write(json.dumps(msg.to_dict(), ensure_ascii=False) + "\n")

    def read_transcript(self, session_id: str) -> list[Message]:
        with open(self.paths(session_id).transcript, "r", encoding="utf-8") as fh:
            return [Message.from_dict(json.loads(line)) for line in fh if line.strip()]

    def write_report(self, session_id: str, name: str, payload: Mapping[str, Any]) -> str:
        paths = self.create(session_id)
        out = os.path.join(paths.reports_dir, f"{name}.json")
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(dict(payload), fh, ensure_ascii=False, indent=2)
        return out

    def write_final_policy(self, session_id: str, source: str) -> None:
        with open(self.create(session_id).final_policy, "w", encoding="utf-8") as fh:
            fh.write(source)

    def persist_messages(self, session_id: str, messages: Sequence[Message]) -> None:
        """Append messages and mirror report/acceptance payloads as artifacts."""
        if not messages:
            return
        self.append_messages(session_id, messages)
        for msg in messages:
            if msg.kind in (MessageKind.TEST_REPORT, MessageKind.TUNING_REPORT):
                self.write_report(
                    session_id, f"{msg.kind.value}_{msg.seq:04d}", dict(msg.payload)
                )
            if msg.kind is MessageKind.ACCEPTANCE:
                self.write_final_policy(session_id, str(msg.payload["policy_source"]))


def canonical_message(msg: Message) -> dict[str, Any]:
    """A message as a dict with run-specific noise (id, timestamp) removed."""
    d = msg.to_dict()
    d.pop("session_id", None)
    d.pop("timestamp", None)
    return d


def canonical_transcript(messages: Sequence[Message]) -> list[str]:
    """Stable one-line-per-message form for golden-file comparison."""
    return [
        json.dumps(canonical_message(m), ensure_ascii=False, sort_keys=True)
        for m in messages
    ]


def write_golden(path: str, messages: Sequence[Message]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(canonical_transcript(messages)) + "\n")


def read_golden(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return [line for line in fh.read().splitlines() if line.strip()]
