"""Command-line entry points: run sessions, replay, simulate, serve."""
from __future__ import annotations

import os

import click
import yaml

from .config import (
    SessionConfig,
    config_from_dict,
    default_config,
    load_config,
    make_backends,
    resolve_suite,
)
from .dsl import parse
from .errors import CrewforgeError, InvalidSpec
from .orchestrator import (
    Deps,
    ScriptedFeedback,
    SessionState,
    TERMINAL_PHASES,
    Phase,
    start_session,
    step,
    step_bound,
)
from .roles import Message, MessageKind, TaskSpec, party_value
from .sim import Scenario, builtin_suite, export_trajectory, load_scenarios, run_scenario
from .store import SessionStore, canonical_transcript
from .tester import FeedbackCategory, UserFeedback, Verdict


def _describe(msg: Message) -> str:
    p = msg.payload
    kind = msg.kind
    if kind in (MessageKind.PLAN, MessageKind.SUBTASK):
        detail = ", ".join(s["id"] for s in p["subtasks"]) or "(empty)"
    elif kind is MessageKind.PARSE_REPORT:
        detail = f"{p['subject']}: " + ("ok" if p["ok"] else "; ".join(p["diagnostics"]))
    elif kind is MessageKind.POLICY_DRAFT:
        detail = f"{len(str(p['source']).splitlines())} lines"
    elif kind is MessageKind.TEST_REPORT:
        detail = ("PASS" if p["passed"] else "FAIL") + f", objective {p['objective']:.4f}"
    elif kind is MessageKind.TUNING_REPORT:
        detail = f"round {p['round']}: {p['notes']}"
    elif kind is MessageKind.USER_FEEDBACK:
        detail = p["verdict"] + (f" ({', '.join(p['categories'])})" if p["categories"] else "")
    elif kind in (MessageKind.ESCALATION, MessageKind.FAILURE):
        detail = p["reason"]
    elif kind is MessageKind.ACCEPTANCE:
        detail = "policy accepted"
    else:
        detail = ""
    route = f"{party_value(msg.sender)} -> {party_value(msg.recipient)}"
    return f"[{msg.seq:02d}] {route:22s} {kind.value:13s} {detail}"


def _load_cli_config(config_path: str | None, backend_kind: str | None) -> SessionConfig:
    config = load_config(config_path) if config_path else default_config()
    if backend_kind and backend_kind != config.backend.kind:
        data = config.to_dict()
        data["backend"]["kind"] = backend_kind
        config = config_from_dict(data)
    return config


def _parse_feedback_script(spec: str) -> list[UserFeedback]:
    """Parse e.g. ``"Adjust:TooClose,TooFar; Approve"`` into feedback items."""
    items: list[UserFeedback] = []
    for raw in spec.split(";"):
        raw = raw.strip()
        if not raw:
            continue
        verdict_part, _, cats_part = raw.partition(":")
        try:
            verdict = Verdict(verdict_part.strip())
            categories = tuple(
                FeedbackCategory(c.strip()) for c in cats_part.split(",") if c.strip()
            )
            items.append(UserFeedback(verdict, categories, notes="scripted"))
        except ValueError as exc:
            raise click.UsageError(f"bad --feedback item {raw!r}: {exc}") from exc
    if not items:
        raise click.UsageError("--feedback given but no verdicts parsed")
    return items


def _interactive_feedback(state: SessionState) -> UserFeedback:
    report = state.latest(MessageKind.TEST_REPORT)
    if report is not None:
        click.echo(
            f"-- review: tests {'passed' if report.payload['passed'] else 'failed'}, "
            f"objective {report.payload['objective']:.4f}"
        )
    verdict = Verdict(
        click.prompt("verdict", type=click.Choice([v.value for v in Verdict]))
    )
    categories: tuple[FeedbackCategory, ...] = ()
    if verdict is Verdict.ADJUST:
        options = ", ".join(c.value for c in FeedbackCategory)
        while not categories:
            raw = click.prompt(f"categories (comma-separated: {options})")
            try:
                categories = tuple(
                    FeedbackCategory(c.strip()) for c in raw.split(",") if c.strip()
                )
            except ValueError as exc:
                click.echo(f"  {exc}")
    notes = click.prompt("notes", default="", show_default=False)
    return UserFeedback(verdict, categories, notes)


def _auto_feedback(state: SessionState) -> UserFeedback:
    report = state.latest(MessageKind.TEST_REPORT)
    passed = bool(report is not None and report.payload["passed"])
    verdict = Verdict.APPROVE if passed else Verdict.REJECT
    return UserFeedback(verdict, notes="unattended run")


def _drive(state: SessionState, deps: Deps, store: SessionStore | None) -> SessionState:
    printed = 0

    def flush(s: SessionState) -> None:
        nonlocal printed
        new = s.transcript[printed:]
        for msg in new:
            click.echo(_describe(msg))
        if store is not None:
            store.persist_messages(s.session_id, new)
        printed = len(s.transcript)

    flush(state)
    for _ in range(step_bound(state.config)):
        if state.phase in TERMINAL_PHASES:
            break
        state = step(state, deps)
        flush(state)
    return state


@click.group()
def main() -> None:
    """Collaborative policy development for a target-following robot."""


@main.command()
@click.argument("taskspec_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Session config YAML (defaults to the bundled demo config).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--backend", "backend_kind", type=click.Choice(["scripted", "http"]),
              help="Override the backend kind from the config.")
@click.option("--auto/--manual", "auto", default=True,
              help="Unattended review verdicts vs. interactive prompts.")
@click.option("--feedback", "feedback_spec",
              help='Scripted verdicts, e.g. "Adjust:TooClose; Approve".')
def run(taskspec_file: str, config_path: str | None, seed: int,
        backend_kind: str | None, auto: bool, feedback_spec: str | None) -> None:
    """Run a full development session for TASKSPEC_FILE."""
    try:
        config = _load_cli_config(config_path, backend_kind)
        with open(taskspec_file, "r", encoding="utf-8") as fh:
            spec = TaskSpec.from_dict(yaml.safe_load(fh) or {})
        state = start_session(spec, config, rng_seed=seed)
    except (InvalidSpec, CrewforgeError, yaml.YAMLError, KeyError, TypeError) as exc:
        raise click.UsageError(str(exc)) from exc

    store = SessionStore(config.sessions_dir)
    store.write_taskspec(state.session_id, spec.to_dict())
    store.write_config(state.session_id, {**config.to_dict(), "seed": seed})
    if feedback_spec:
        provider = ScriptedFeedback(_parse_feedback_script(feedback_spec))
    elif auto:
        provider = _auto_feedback
    else:
        provider = _interactive_feedback
    deps = Deps(
        backends=make_backends(config, log=store.call_log(state.session_id)),
        suite=resolve_suite(config),
        feedback_provider=provider,
    )
    click.echo(f"session {state.session_id} -> {store.paths(state.session_id).root}")
    state = _drive(state, deps, store)
    click.echo(f"final phase: {state.phase.value}")
    if state.phase is not Phase.ACCEPTED:
        raise SystemExit(1)


@main.command()
@click.argument("session_id")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Only used to locate the sessions directory.")
def replay(session_id: str, config_path: str | None) -> None:
    """Re-run a stored session and check the transcript is reproduced."""
    base = load_config(config_path) if config_path else default_config()
    store = SessionStore(base.sessions_dir)
    if not store.exists(session_id):
        raise click.UsageError(f"no stored session {session_id!r} under {store.root}")
    paths = store.paths(session_id)
    with open(paths.taskspec, "r", encoding="utf-8") as fh:
        spec = TaskSpec.from_dict(yaml.safe_load(fh))
    with open(paths.config, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    seed = int(data.pop("seed", 0))
    config = config_from_dict(data)
    original = store.read_transcript(session_id)
    feedbacks = [
        UserFeedback.from_dict(m.payload)
        for m in original
        if m.kind is MessageKind.USER_FEEDBACK
    ]
    deps = Deps(
        backends=make_backends(config),
        suite=resolve_suite(config),
        feedback_provider=ScriptedFeedback(feedbacks),
    )
    state = _drive(start_session(spec, config, rng_seed=seed), deps, store=None)
    fresh, stored = canonical_transcript(state.transcript), canonical_transcript(original)
    if fresh == stored:
        click.echo("transcript identical")
        return
    click.echo(f"transcript diverged: {len(stored)} stored vs {len(fresh)} replayed lines")
    for i, (a, b) in enumerate(zip(stored, fresh)):
        if a != b:
            click.echo(f"first difference at seq {i}:\n  stored:   {a}\n  replayed: {b}")
            break
    raise SystemExit(1)


def _pick_suite(suite_path: str | None) -> list[Scenario]:
    if suite_path is None:
        return builtin_suite()
    return load_scenarios(suite_path)


@main.command()
@click.argument("policy_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("scenario_name", required=False)
@click.option("--suite", "suite_path", type=click.Path(exists=True, dir_okay=False),
              help="Scenario suite YAML (defaults to the built-in suite).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--export", "export_path", type=click.Path(dir_okay=False),
              help="Write the trajectory of the (single) scenario as CSV.")
def simulate(policy_file: str, scenario_name: str | None, suite_path: str | None,
             seed: int, export_path: str | None) -> None:
    """Run a policy through one scenario (or the whole suite) and print metrics."""
    try:
        with open(policy_file, "r", encoding="utf-8") as fh:
            policy = parse(fh.read())
        scenarios = _pick_suite(suite_path)
    except CrewforgeError as exc:
        raise click.UsageError(str(exc)) from exc
    if scenario_name is not None:
        scenarios = [s for s in scenarios if s.name == scenario_name]
        if not scenarios:
            raise click.UsageError(f"unknown scenario {scenario_name!r}")
    if export_path and len(scenarios) != 1:
        raise click.UsageError("--export needs a single scenario")
    for scenario in scenarios:
        result = run_scenario(policy, scenario, seed)
        s = result.summary()
        click.echo(
            f"{s['scenario']:14s} ticks={s['ticks']:5d} band={s['band_fraction']:.3f} "
            f"rms={s['rms_dist_error']:.3f} collisions={s['collisions']} "
            f"lost={str(s['target_lost']).lower()}"
        )
        if export_path:
            export_trajectory(result, export_path)
            click.echo(f"trajectory written to {export_path}")


@main.command()
@click.option("--suite", "suite_path", type=click.Path(exists=True, dir_okay=False),
              help="Scenario suite YAML (defaults to the built-in suite).")
def suite(suite_path: str | None) -> None:
    """List the scenarios a session tests against."""
    for s in _pick_suite(suite_path):
        click.echo(
            f"{s.name:14s} {s.duration_s:6.1f}s  waypoints={len(s.target_path)} "
            f"obstacles={len(s.obstacles)} follow={s.desired_follow_dist}m "
            f"band=±{s.band_tolerance}m"
        )


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Session config YAML (defaults to the bundled demo config).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=None, help="Defaults to the config's port.")
@click.option("--console-dir", type=click.Path(file_okay=False),
              help="Directory of built console assets to serve at /.")
def serve(config_path: str | None, host: str, port: int | None,
          console_dir: str | None) -> None:
    """Serve the HTTP API (and the operator console when built)."""
    import uvicorn

    from .service import create_app

    try:
        config = _load_cli_config(config_path, None)
    except (InvalidSpec, CrewforgeError) as exc:
        raise click.UsageError(str(exc)) from exc
    if console_dir is None and os.path.isdir(os.path.join("frontend", "dist")):
        console_dir = os.path.join("frontend", "dist")
    app = create_app(config, console_dir=console_dir)
    uvicorn.run(app, host=host, port=port if port is not None else config.port)


if __name__ == "__main__":
    main()
