"""HTTP service tests: session lifecycle, long-poll feed, feedback, trajectories."""
from __future__ import annotations

import json
import os
import threading
import time

import pytest
from fastapi.testclient import TestClient

from crewforge.config import SessionConfig
from crewforge.service import ServiceHub, create_app
from crewforge.store import SessionStore

POLL = {"wait_s": 1.0}
DONE = ("Accepted", "Failed")


@pytest.fixture()
def service(happy_spec, make_config):
    config = make_config(tuning={"rounds": 1, "evals_per_round": 2})
    store = SessionStore(config.sessions_dir)
    app = create_app(config, store=store)
    with TestClient(app) as client:
        yield client, happy_spec.to_dict(), config, store


def start(client, spec_dict, **body) -> str:
    resp = client.post("/sessions", json={"taskspec": spec_dict, **body})
    assert resp.status_code == 200, resp.text
    return resp.json()["session_id"]


def poll_until(client, sid, stop_phases, since=-1, timeout=30.0):
    """Collect transcript increments until the session reaches one of the
    given phases; returns (phase, messages). Messages arrive exactly once."""
    deadline = time.monotonic() + timeout
    messages: list[dict] = []
    while time.monotonic() < deadline:
        resp = client.get(
            f"/sessions/{sid}/transcript", params={"since_seq": since, **POLL}
        )
        assert resp.status_code == 200
        data = resp.json()
        messages.extend(data["messages"])
        if messages:
            since = messages[-1]["seq"]
        if data["phase"] in stop_phases:
            return data["phase"], messages
    raise AssertionError(f"timed out waiting for {stop_phases}")


def feedback(client, sid, verdict, categories=(), notes=""):
    return client.post(
        f"/sessions/{sid}/feedback",
        json={"verdict": verdict, "categories": list(categories), "notes": notes},
    )


# --- basics ---


def test_healthz(service):
    client, *_ = service
    assert client.get("/healthz").json() == {"status": "ok"}


def test_auto_session_streams_to_user_review(service):
    client, spec_dict, *_ = service
    sid = start(client, spec_dict, mode="auto", seed=0)
    phase, messages = poll_until(client, sid, ("UserReview",))
    assert phase == "UserReview"
    assert [m["seq"] for m in messages] == list(range(7))
    kinds = [m["kind"] for m in messages]
    assert kinds == [
        "requirements", "plan", "parse_report", "subtask",
        "policy_draft", "parse_report", "test_report",
    ]


def test_long_poll_returns_early_not_at_timeout(service):
    client, spec_dict, *_ = service
    sid = start(client, spec_dict, mode="auto")
    t0 = time.monotonic()
    resp = client.get(
        f"/sessions/{sid}/transcript", params={"since_seq": -1, "wait_s": 10.0}
    )
    elapsed = time.monotonic() - t0
    assert resp.json()["messages"]  # the drive thread was already producing
    assert elapsed < 8.0


def test_approve_completes_session(service):
    client, spec_dict, *_ = service
    sid = start(client, spec_dict, mode="auto")
    _, messages = poll_until(client, sid, ("UserReview",))
    resp = feedback(client, sid, "Approve", notes="looks right")
    assert resp.status_code == 204
    phase, more = poll_until(client, sid, DONE, since=messages[-1]["seq"])
    assert phase == "Accepted"
    assert [m["kind"] for m in more] == ["user_feedback", "acceptance"]
    view = client.get(f"/sessions/{sid}").json()
    assert view["phase"] == "Accepted"
    assert view["counters"]["transcript_len"] == 9


def test_adjust_too_close_backs_the_robot_off(service):
    client, spec_dict, *_ = service
    sid = start(client, spec_dict, mode="auto")
    _, messages = poll_until(client, sid, ("UserReview",))
    report = next(m for m in messages if m["kind"] == "test_report")
    before = report["payload"]["params"]["follow_dist"]

    assert feedback(client, sid, "Adjust", ["TooClose"], "give more room").status_code == 204
    phase, more = poll_until(
        client, sid, ("UserReview", "Accepted", "Failed"), since=messages[-1]["seq"]
    )
    assert phase == "UserReview"
    tuning = next(m for m in more if m["kind"] == "tuning_report")
    assert {d["param_name"]: d["direction"] for d in tuning["payload"]["directive"]} == {
        "follow_dist": "Increase"
    }
    assert tuning["payload"]["updates"]["follow_dist"] > before
    # the retest rode in after the tuning round
    assert [m["kind"] for m in more] == ["user_feedback", "tuning_report", "test_report"]

    assert feedback(client, sid, "Approve").status_code == 204
    phase, _ = poll_until(client, sid, DONE, since=more[-1]["seq"])
    assert phase == "Accepted"


# --- manual mode ---


def test_manual_mode_steps_only_on_advance(service):
    client, spec_dict, *_ = service
    sid = start(client, spec_dict, mode="manual")
    view = client.get(f"/sessions/{sid}").json()
    assert view["phase"] == "Intake"
    assert view["counters"]["transcript_len"] == 1

    expected = ["Analysis", "PlanValidation", "CodeGen", "StaticValidation",
                "SimTest", "UserReview"]
    seen = []
    for _ in expected:
        assert client.post(f"/sessions/{sid}/advance").status_code == 204
        seen.append(client.get(f"/sessions/{sid}").json()["phase"])
    assert seen == expected


def test_manual_advance_parks_at_user_review(service):
    client, spec_dict, *_ = service
    sid = start(client, spec_dict, mode="manual")
    for _ in range(6):
        client.post(f"/sessions/{sid}/advance")
    before = client.get(f"/sessions/{sid}").json()
    assert before["phase"] == "UserReview"
    # advancing without feedback must not invent a verdict
    client.post(f"/sessions/{sid}/advance")
    after = client.get(f"/sessions/{sid}").json()
    assert after["phase"] == "UserReview"
    assert after["counters"]["transcript_len"] == before["counters"]["transcript_len"]

    assert feedback(client, sid, "Approve").status_code == 204
    client.post(f"/sessions/{sid}/advance")
    assert client.get(f"/sessions/{sid}").json()["phase"] == "Accepted"


def test_advance_is_noop_for_auto_sessions(service):
    client, spec_dict, *_ = service
    sid = start(client, spec_dict, mode="auto")
    assert client.post(f"/sessions/{sid}/advance").status_code == 204


# --- feed pagination ---


def test_since_seq_pagination_exactly_once(service):
    client, spec_dict, *_ = service
    sid = start(client, spec_dict, mode="manual")
    for _ in range(3):
        client.post(f"/sessions/{sid}/advance")

    url = f"/sessions/{sid}/transcript"
    all_msgs = client.get(url, params={"since_seq": -1, "wait_s": 0}).json()["messages"]
    assert [m["seq"] for m in all_msgs] == [0, 1, 2, 3]
    assert client.get(url, params={"since_seq": 3, "wait_s": 0}).json()["messages"] == []
    client.post(f"/sessions/{sid}/advance")
    tail = client.get(url, params={"since_seq": 3, "wait_s": 0}).json()["messages"]
    assert [m["seq"] for m in tail] == [4]


def test_feed_resumes_after_dropped_connection(service):
    """A client that loses state mid-stream re-polls from its last acked seq
    and still sees every message exactly once."""
    client, spec_dict, *_ = service
    sid = start(client, spec_dict, mode="auto")
    phase, first = poll_until(client, sid, ("UserReview",))
    cut = len(first) // 2
    acked = first[:cut]  # pretend the rest was lost with the connection

    resumed = poll_until(client, sid, ("UserReview",), since=acked[-1]["seq"])[1]
    seqs = [m["seq"] for m in acked + resumed]
    assert seqs == sorted(set(seqs)) == list(range(7))


def test_concurrent_pollers_each_see_every_message_once(happy_spec, make_config):
    from crewforge.tester import UserFeedback, Verdict

    config = make_config(tuning={"rounds": 1, "evals_per_round": 2})
    hub = ServiceHub(config, SessionStore(config.sessions_dir))
    sid = hub.create_session(happy_spec, mode="auto")

    def consume(out: list[int]) -> None:
        since = -1
        deadline = time.monotonic() + 30
        while time.monotonic() < deadline:
            for msg in hub.wait_transcript(sid, since, wait_s=0.5):
                out.append(msg["seq"])
                since = msg["seq"]
            state = hub.runtime(sid).state
            if state.phase.value in DONE and since >= len(state.transcript) - 1:
                return

    outs: list[list[int]] = [[] for _ in range(4)]
    threads = [threading.Thread(target=consume, args=(o,)) for o in outs]
    for t in threads:
        t.start()
    # one coordinator supplies the verdict while the pollers race the feed
    deadline = time.monotonic() + 30
    while hub.runtime(sid).state.phase.value != "UserReview":
        assert time.monotonic() < deadline
        time.sleep(0.02)
    hub.feedback(sid, UserFeedback(Verdict.APPROVE))
    for t in threads:
        t.join(timeout=40)
    for seqs in outs:
        assert seqs == list(range(9))


# --- views and trajectories ---


def test_view_exposes_policy_and_metrics(service):
    client, spec_dict, *_ = service
    sid = start(client, spec_dict, mode="auto")
    poll_until(client, sid, ("UserReview",))
    view = client.get(f"/sessions/{sid}").json()
    assert view["policy"].startswith("policy follow_and_avoid {")
    assert view["metrics"]["passed"] is True
    assert {s["scenario"] for s in view["metrics"]["scenarios"]} == {
        "straight_walk", "l_walk", "corridor", "speed_burst"
    }
    assert view["mode"] == "auto"
    assert len(view["last_messages"]) <= 10
    listing = client.get("/sessions").json()
    assert [v["session_id"] for v in listing] == [sid]


def test_trajectory_rows_and_determinism(service):
    client, spec_dict, *_ = service
    sid = start(client, spec_dict, mode="auto")
    poll_until(client, sid, ("UserReview",))
    url = f"/sessions/{sid}/trajectory/corridor"
    a = client.get(url).json()
    assert a["columns"] == ["t", "x", "y", "theta", "tx", "ty", "dist"]
    assert len(a["rows"]) == 1201  # 60 s at 20 Hz, plus the initial pose
    assert a["metrics"]["scenario"] == "corridor"
    assert a["scenario"]["name"] == "corridor"
    b = client.get(url).json()
    assert a == b


def test_trajectory_before_policy_is_conflict(service):
    client, spec_dict, *_ = service
    sid = start(client, spec_dict, mode="manual")
    resp = client.get(f"/sessions/{sid}/trajectory/corridor")
    assert resp.status_code == 409


def test_trajectory_unknown_scenario(service):
    client, spec_dict, *_ = service
    sid = start(client, spec_dict, mode="auto")
    poll_until(client, sid, ("UserReview",))
    assert client.get(f"/sessions/{sid}/trajectory/moon_base").status_code == 404


# --- error paths ---


def test_unknown_session_is_404_everywhere(service):
    client, *_ = service
    assert client.get("/sessions/nope").status_code == 404
    assert client.get("/sessions/nope/transcript").status_code == 404
    assert client.get("/sessions/nope/trajectory/corridor").status_code == 404
    assert feedback(client, "nope", "Approve").status_code == 404
    assert client.post("/sessions/nope/advance").status_code == 404


def test_feedback_outside_user_review_is_conflict(service):
    client, spec_dict, *_ = service
    sid = start(client, spec_dict, mode="manual")
    assert feedback(client, sid, "Approve").status_code == 409

    sid2 = start(client, spec_dict, mode="auto")
    poll_until(client, sid2, ("UserReview",))
    feedback(client, sid2, "Approve")
    poll_until(client, sid2, DONE, since=6)
    assert feedback(client, sid2, "Approve").status_code == 409


def test_create_session_rejects_bad_input(service):
    client, spec_dict, *_ = service
    assert client.post("/sessions", json={}).status_code == 400

    broken = {**spec_dict, "robot_params": {**spec_dict["robot_params"],
                                            "max_linear_speed_mps": 0}}
    resp = client.post("/sessions", json={"taskspec": broken})
    assert resp.status_code == 400
    assert "robot_params.max_linear_speed_mps: max linear speed must be > 0" in resp.json()["detail"]

    resp = client.post("/sessions", json={"taskspec": spec_dict, "mode": "turbo"})
    assert resp.status_code == 400
    assert "turbo" in resp.json()["detail"]


def test_create_session_rejects_bad_config_override(service):
    client, spec_dict, *_ = service
    resp = client.post(
        "/sessions", json={"taskspec": spec_dict, "config": {"backend": {"kind": "psychic"}}}
    )
    assert resp.status_code == 400


def test_malformed_feedback_is_400(service):
    client, spec_dict, *_ = service
    sid = start(client, spec_dict, mode="auto")
    poll_until(client, sid, ("UserReview",))
    assert feedback(client, sid, "Maybe").status_code == 400
    # Adjust without a category is contradictory, not just unusual
    assert feedback(client, sid, "Adjust").status_code == 400
    resp = client.post(f"/sessions/{sid}/feedback", json={"notes": "no verdict"})
    assert resp.status_code == 400


# --- persistence ---


def test_session_artifacts_land_on_disk(service):
    client, spec_dict, config, store = service
    sid = start(client, spec_dict, mode="auto")
    poll_until(client, sid, ("UserReview",))
    feedback(client, sid, "Approve")
    poll_until(client, sid, DONE, since=6)

    paths = store.paths(sid)
    with open(paths.transcript, encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    assert [m["seq"] for m in lines] == list(range(9))

    assert os.path.exists(paths.taskspec)
    assert os.path.exists(paths.config)
    with open(paths.final_policy, encoding="utf-8") as fh:
        assert fh.read().startswith("policy follow_and_avoid {")
    reports = sorted(os.listdir(paths.reports_dir))
    assert "test_report_0006.json" in reports
    assert os.path.exists(paths.calls)  # every LLM invocation is on disk too
