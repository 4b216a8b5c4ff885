"""Record real service exchanges into JSON fixtures for the console tests.

Runs the session service in-process (no sockets) with scripted backends and
captures, per operator action, exactly what the browser would have seen:
the new transcript messages and the phase reported alongside them.  The
vitest suites replay these captures through a fake fetch, so the frontend
is tested against genuine wire payloads rather than hand-written ones.

Usage: python3 scripts/record_fixtures.py  (from the frontend/ directory)
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
from typing import Any

import yaml
from fastapi.testclient import TestClient

from crewforge.backend import load_script
from crewforge.config import config_from_dict, default_config, happy_path_dir
from crewforge.service import create_app
from crewforge.store import SessionStore

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "__tests__", "fixtures")


def _bundled_response(script_name: str) -> str:
    path = os.path.join(happy_path_dir(), "scripts", script_name)
    return load_script(path)[0].response


def _write_scripts(tmp: str, copies: int, narrations: int) -> dict[str, str]:
    """Scripted role backends with enough entries for several analysis cycles."""
    # No match guards: re-asks after escalation use different wording than the
    # first request, and these scripts should answer both.
    entries = {
        "analyst.yaml": [{"response": _bundled_response("analyst.yaml")}] * copies,
        "programmer.yaml": [{"response": _bundled_response("programmer.yaml")}] * copies,
        "tester.yaml": [{"response": "Scenario sweep recorded."}] * narrations,
    }
    paths: dict[str, str] = {}
    for name, script in entries.items():
        path = os.path.join(tmp, name)
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump({"script": script}, fh)
        paths[name.split(".")[0]] = path
    return paths


def _config_dict(tmp: str, copies: int, narrations: int, **overrides: Any) -> dict[str, Any]:
    data = default_config().to_dict()
    data["backend"] = {**data["backend"], "scripts": _write_scripts(tmp, copies, narrations)}
    data["tuning"] = {"rounds": 1, "evals_per_round": 2, "nudge_fraction": 0.1}
    for key, value in overrides.items():
        section, _, leaf = key.partition(".")
        if leaf:
            data[section] = {**data[section], leaf: value}
        else:
            data[section] = value
    return data


class Recorder:
    """Drives one manual-mode session and captures each action's transcript delta."""

    def __init__(self, client: TestClient, spec: dict[str, Any], config: dict[str, Any]):
        self.client = client
        self.steps: list[dict[str, Any]] = []
        self.since = -1
        response = client.post(
            "/sessions", json={"taskspec": spec, "config": config, "seed": 0, "mode": "manual"}
        )
        response.raise_for_status()
        self.session_id = response.json()["session_id"]
        self._capture("create")

    def _capture(self, action: str, body: dict[str, Any] | None = None) -> dict[str, Any]:
        response = self.client.get(
            f"/sessions/{self.session_id}/transcript",
            params={"since_seq": self.since, "wait_s": 0},
        )
        response.raise_for_status()
        chunk = response.json()
        if chunk["messages"]:
            self.since = chunk["messages"][-1]["seq"]
        step: dict[str, Any] = {"action": action, **chunk}
        if body is not None:
            step["body"] = body
        self.steps.append(step)
        return chunk

    def advance(self) -> dict[str, Any]:
        self.client.post(f"/sessions/{self.session_id}/advance").raise_for_status()
        return self._capture("advance")

    def feedback(self, verdict: str, categories: list[str], notes: str) -> dict[str, Any]:
        body = {"verdict": verdict, "categories": categories, "notes": notes}
        self.client.post(f"/sessions/{self.session_id}/feedback", json=body).raise_for_status()
        return self._capture("feedback", body)

    def run_until(self, stop: tuple[str, ...], limit: int = 80) -> str:
        phase = self.advance()["phase"]
        while phase not in stop and len(self.steps) < limit:
            phase = self.advance()["phase"]
        return phase

    def dump(self, name: str, description: str) -> dict[str, Any]:
        messages = [m for s in self.steps for m in s["messages"]]
        seqs = [m["seq"] for m in messages]
        assert seqs == list(range(len(seqs))), f"gappy transcript: {seqs}"
        fixture = {
            "description": description,
            "session_id": self.session_id,
            "final_phase": self.steps[-1]["phase"],
            "message_count": len(messages),
            "steps": self.steps,
        }
        path = os.path.join(FIXTURE_DIR, name)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(fixture, fh, indent=1)
        print(
            f"wrote {name}: {len(self.steps)} steps, {len(messages)} messages, "
            f"final phase {fixture['final_phase']}"
        )
        return fixture


def record_escalation(client: TestClient, spec: dict[str, Any], tmp: str) -> None:
    """A long failing run: three analysis cycles, ending Failed (>=20 transitions)."""
    config = _config_dict(
        tmp, copies=4, narrations=12,
        k_adjust=3, k_replan=2, **{"thresholds.min_band_fraction": 1.01},
    )
    recorder = Recorder(client, spec, config)
    final = recorder.run_until(("Accepted", "Failed"))
    assert final == "Failed", f"expected Failed, got {final}"
    analyses = sum(1 for s in recorder.steps if s["phase"] == "Analysis")
    transitions = len(recorder.steps) - 1  # steps minus the create capture
    assert transitions >= 20, f"only {transitions} transitions"
    recorder.dump(
        "escalation_session.json",
        f"manual session, unreachable band threshold: {transitions} transitions, "
        f"{analyses} Analysis phases, terminal Failed",
    )


def record_adjust(client: TestClient, spec: dict[str, Any], tmp: str) -> None:
    """A passing run steered by Adjust/TooClose, then approved."""
    config = _config_dict(tmp, copies=2, narrations=8)
    recorder = Recorder(client, spec, config)
    phase = recorder.run_until(("UserReview", "Accepted", "Failed"))
    assert phase == "UserReview", f"expected UserReview, got {phase}"
    recorder.feedback("Adjust", ["TooClose"], "drop back a bit")
    phase = recorder.run_until(("UserReview", "Accepted", "Failed"))
    assert phase == "UserReview", f"expected UserReview after adjust, got {phase}"
    recorder.feedback("Approve", [], "looks right now")
    final = recorder.run_until(("Accepted", "Failed"))
    assert final == "Accepted", f"expected Accepted, got {final}"

    messages = [m for s in recorder.steps for m in s["messages"]]
    reports = [m for m in messages if m["kind"] == "test_report"]
    tunings = [m for m in messages if m["kind"] == "tuning_report"]
    before = reports[0]["payload"]["params"]["follow_dist"]
    after = tunings[-1]["payload"]["updates"]["follow_dist"]
    assert after > before, f"follow_dist did not increase: {before} -> {after}"
    fixture = recorder.dump(
        "adjust_session.json",
        f"manual session approved after Adjust/TooClose; follow_dist {before} -> {after}",
    )

    phases = [s["phase"] for s in fixture["steps"]]
    assert "Tuning" in phases, f"Tuning never visible: {phases}"

    response = client.get(f"/sessions/{recorder.session_id}/trajectory/corridor")
    response.raise_for_status()
    table = response.json()
    path = os.path.join(FIXTURE_DIR, "corridor_trajectory.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table, fh)
    print(f"wrote corridor_trajectory.json: {len(table['rows'])} rows")


def main() -> int:
    os.makedirs(FIXTURE_DIR, exist_ok=True)
    with open(os.path.join(happy_path_dir(), "taskspec.yaml"), "r", encoding="utf-8") as fh:
        spec = yaml.safe_load(fh)
    with tempfile.TemporaryDirectory() as tmp:
        data = default_config().to_dict()
        data["sessions_dir"] = os.path.join(tmp, "sessions")
        app = create_app(config_from_dict(data), SessionStore(data["sessions_dir"]))
        with TestClient(app) as client:
            record_escalation(client, spec, tmp)
            record_adjust(client, spec, tmp)
    return 0


if __name__ == "__main__":
    sys.exit(main())
