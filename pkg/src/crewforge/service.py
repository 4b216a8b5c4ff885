"""HTTP service: session lifecycle, live transcript feed, trajectories.

Each session runs behind its own lock; automatic sessions advance on a
background thread that pauses at UserReview and resumes when feedback
arrives. The transcript feed is a long-poll: clients ask for messages past
a sequence number and the request parks on a condition variable until new
messages land or the poll times out.
"""
from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field
from typing import Any, Mapping

from fastapi import Body, FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles

from .config import SessionConfig, config_from_dict, make_backends, resolve_suite
from .dsl import print_policy
from .errors import InvalidSpec, WrongPhase
from .orchestrator import (
    Deps,
    Phase,
    SessionState,
    TERMINAL_PHASES,
    _pending_feedback,
    start_session,
    step,
    submit_user_feedback,
)
from .roles import MessageKind, TaskSpec
from .sim import run_scenario
from .store import SessionStore
from .tester import UserFeedback

AUTO = "auto"
MANUAL = "manual"


@dataclass
class SessionRuntime:
    state: SessionState
    deps: Deps
    mode: str
    lock: threading.Lock = field(default_factory=threading.Lock)
    feed: threading.Condition = field(default_factory=threading.Condition)

    def snapshot(self) -> SessionState:
        return self.state


class ServiceHub:
    """Owns all live sessions and their persistence."""

    def __init__(self, config: SessionConfig, store: SessionStore | None = None):
        self.config = config
        self.store = store or SessionStore(config.sessions_dir)
        self.sessions: dict[str, SessionRuntime] = {}
        self._registry_lock = threading.Lock()

    # -- lifecycle --

    def create_session(
        self,
        spec: TaskSpec,
        overrides: Mapping[str, Any] | None = None,
        seed: int = 0,
        mode: str = AUTO,
    ) -> str:
        config = self.config
        if overrides:
            merged = {**config.to_dict(), **dict(overrides)}
            config = config_from_dict(merged)
        state = start_session(spec, config, rng_seed=seed)
        log = self.store.call_log(state.session_id)
        deps = Deps(backends=make_backends(config, log=log), suite=resolve_suite(config))
        runtime = SessionRuntime(state=state, deps=deps, mode=mode)
        with self._registry_lock:
            self.sessions[state.session_id] = runtime
        self.store.write_taskspec(state.session_id, spec.to_dict())
        self.store.write_config(state.session_id, config.to_dict())
        self._persist_from(runtime, 0)
        if mode == AUTO:
            self._kick(runtime)
        return state.session_id

    def runtime(self, session_id: str) -> SessionRuntime:
        runtime = self.sessions.get(session_id)
        if runtime is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return runtime

    # -- stepping --

    def _persist_from(self, runtime: SessionRuntime, old_len: int) -> None:
        state = runtime.state
        new = state.transcript[old_len:]
        if not new:
            return
        self.store.persist_messages(state.session_id, new)
        with runtime.feed:
            runtime.feed.notify_all()

    def _step_once(self, runtime: SessionRuntime) -> None:
        with runtime.lock:
            state = runtime.state
            if state.phase in TERMINAL_PHASES:
                return
            if state.phase is Phase.USER_REVIEW and _pending_feedback(state) is None:
                return  # parked until feedback arrives
            old_len = len(state.transcript)
            runtime.state = step(state, runtime.deps)
            self._persist_from(runtime, old_len)

    def _drive(self, runtime: SessionRuntime) -> None:
        while True:
            state = runtime.state
            if state.phase in TERMINAL_PHASES:
                return
            if state.phase is Phase.USER_REVIEW and _pending_feedback(state) is None:
                return
            self._step_once(runtime)

    def _kick(self, runtime: SessionRuntime) -> None:
        threading.Thread(target=self._drive, args=(runtime,), daemon=True).start()

    # -- operations used by the endpoints --

    def advance(self, session_id: str) -> None:
        runtime = self.runtime(session_id)
        if runtime.mode == MANUAL:
            self._step_once(runtime)
        # auto mode: stepping is the drive thread's job; advance is a no-op

    def feedback(self, session_id: str, fb: UserFeedback) -> None:
        runtime = self.runtime(session_id)
        with runtime.lock:
            try:
                old_len = len(runtime.state.transcript)
                runtime.state = submit_user_feedback(runtime.state, fb)
            except WrongPhase as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            self._persist_from(runtime, old_len)
        if runtime.mode == AUTO:
            self._kick(runtime)

    def wait_transcript(
        self, session_id: str, since_seq: int, wait_s: float
    ) -> list[dict[str, Any]]:
        runtime = self.runtime(session_id)

        def fresh() -> list[dict[str, Any]]:
            return [
                m.to_dict() for m in runtime.state.transcript if m.seq > since_seq
            ]

        with runtime.feed:
            messages = fresh()
            if messages or wait_s <= 0:
                return messages
            runtime.feed.wait(timeout=wait_s)
        return fresh()

    def view(self, session_id: str, last_n: int = 10) -> dict[str, Any]:
        runtime = self.runtime(session_id)
        state = runtime.state
        latest_report = state.latest(MessageKind.TEST_REPORT)
        metrics = None
        if latest_report is not None:
            payload = latest_report.payload
            metrics = {
                "passed": payload["passed"],
                "objective": payload["objective"],
                "scenarios": payload["scenarios"],
            }
        return {
            "session_id": state.session_id,
            "phase": state.phase.value,
            "mode": runtime.mode,
            "counters": {
                "tuning_rounds_used": state.tuning_rounds_used,
                "escalations_used": state.escalations_used,
                "transcript_len": len(state.transcript),
            },
            "last_messages": [m.to_dict() for m in state.transcript[-last_n:]],
            "policy": (
                print_policy(state.current_policy)
                if state.current_policy is not None
                else None
            ),
            "metrics": metrics,
        }

    def trajectory(self, session_id: str, scenario_name: str) -> dict[str, Any]:
        runtime = self.runtime(session_id)
        state = runtime.state
        if state.current_policy is None:
            raise HTTPException(status_code=409, detail="session has no policy yet")
        for scenario in runtime.deps.suite:
            if scenario.name == scenario_name:
                result = run_scenario(state.current_policy, scenario, state.rng_seed)
                return {
                    "scenario": scenario.to_dict(),
                    "columns": ["t", "x", "y", "theta", "tx", "ty", "dist"],
                    "rows": [
                        [r.t, r.x, r.y, r.theta, r.tx, r.ty, r.dist]
                        for r in result.trajectory
                    ],
                    "metrics": result.summary(),
                }
        raise HTTPException(status_code=404, detail=f"unknown scenario {scenario_name!r}")


def _parse_feedback(body: Mapping[str, Any]) -> UserFeedback:
    try:
        return UserFeedback.from_dict(dict(body))
    except (KeyError, ValueError) as exc:
        raise HTTPException(
            status_code=400, detail=f"malformed feedback: {exc}"
        ) from exc


def create_app(
    config: SessionConfig,
    store: SessionStore | None = None,
    console_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="crewforge", docs_url=None, redoc_url=None)
    hub = ServiceHub(config, store)
    app.state.hub = hub

    @app.get("/healthz")
    def healthz() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session(body: dict = Body(...)) -> dict[str, str]:
        spec_dict = body.get("taskspec")
        if not isinstance(spec_dict, Mapping):
            raise HTTPException(status_code=400, detail="body.taskspec: required object")
        spec = TaskSpec.from_dict(spec_dict)
        errors = spec.validation_errors()
        if errors:
            raise HTTPException(status_code=400, detail=errors)
        overrides = body.get("config") or {}
        mode = str(body.get("mode", AUTO))
        if mode not in (AUTO, MANUAL):
            raise HTTPException(status_code=400, detail=f"body.mode: unknown mode {mode!r}")
        try:
            session_id = hub.create_session(
                spec, overrides=overrides, seed=int(body.get("seed", 0)), mode=mode
            )
        except InvalidSpec as exc:
            raise HTTPException(status_code=400, detail=exc.errors) from exc
        return {"session_id": session_id}

    @app.get("/sessions")
    def list_sessions() -> list[dict[str, Any]]:
        return [hub.view(sid) for sid in sorted(hub.sessions)]

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict[str, Any]:
        return hub.view(session_id)

    @app.get("/sessions/{session_id}/transcript")
    def get_transcript(
        session_id: str, since_seq: int = -1, wait_s: float | None = None
    ) -> dict[str, Any]:
        timeout = config.long_poll_s if wait_s is None else min(wait_s, config.long_poll_s)
        messages = hub.wait_transcript(session_id, since_seq, timeout)
        return {"messages": messages, "phase": hub.runtime(session_id).state.phase.value}

    @app.post("/sessions/{session_id}/feedback", status_code=204)
    def post_feedback(session_id: str, body: dict = Body(...)) -> Response:
        hub.feedback(session_id, _parse_feedback(body))
        return Response(status_code=204)

    @app.post("/sessions/{session_id}/advance", status_code=204)
    def post_advance(session_id: str) -> Response:
        hub.advance(session_id)
        return Response(status_code=204)

    @app.get("/sessions/{session_id}/trajectory/{scenario_name}")
    def get_trajectory(session_id: str, scenario_name: str) -> dict[str, Any]:
        return hub.trajectory(session_id, scenario_name)

    if console_dir and os.path.isdir(console_dir):
        app.mount("/", StaticFiles(directory=console_dir, html=True), name="console")

    return app
