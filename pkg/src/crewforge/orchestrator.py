"""The collaboration state machine.

A session moves through fixed phases — intake, analysis, plan validation,
code generation, static validation, simulated testing, tuning, user review —
with bounded re-ask and escalation budgets. Every transition appends typed
messages to an append-only transcript; the transcript plus the rng seed is
the whole truth of a session, which is what makes replays comparable.

State is immutable: ``step`` returns a new ``SessionState``. Callers that
persist sessions diff the transcript length before/after a step and append
the new messages.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Mapping, Sequence

from .backend import FRAMEWORK, ChatBackend, ChatRequest, Turn
from .config import SessionConfig
from .dsl import Policy, parse_with_warnings, print_policy
from .errors import (
    BackendError,
    MissingFeedback,
    PolicySyntaxError,
    PolicyValidationError,
    WrongPhase,
)
from .roles import (
    USER,
    Message,
    MessageKind,
    Role,
    RoleInstruction,
    SubtaskPlan,
    TaskSpec,
    load_default_instruction,
    make_message,
    new_session_id,
    render_instruction,
    validate_plan,
)
from .sim import Scenario
from .tester import (
    Direction,
    EscalationReport,
    Hint,
    TestReport,
    TuningDirective,
    UserFeedback,
    Verdict,
    apply_directive,
    compose_escalation,
    evaluate_suite,
    feedback_to_directive,
    tune,
)


class Phase(str, Enum):
    INTAKE = "Intake"
    ANALYSIS = "Analysis"
    PLAN_VALIDATION = "PlanValidation"
    CODEGEN = "CodeGen"
    STATIC_VALIDATION = "StaticValidation"
    SIM_TEST = "SimTest"
    TUNING = "Tuning"
    USER_REVIEW = "UserReview"
    ESCALATION = "Escalation"
    ACCEPTED = "Accepted"
    FAILED = "Failed"


TERMINAL_PHASES = frozenset({Phase.ACCEPTED, Phase.FAILED})

FeedbackProvider = Callable[["SessionState"], UserFeedback]


@dataclass
class Deps:
    """Collaborators injected into the state machine.

    ``feedback_provider`` stands in for the human at UserReview when running
    unattended; interactive frontends submit feedback explicitly instead.
    """

    backends: Mapping[Role, ChatBackend]
    suite: Sequence[Scenario]
    instructions: Mapping[Role, RoleInstruction] = field(default_factory=dict)
    feedback_provider: FeedbackProvider | None = None

    def instruction(self, role: Role) -> RoleInstruction:
        instr = self.instructions.get(role)
        if instr is None:
            instr = load_default_instruction(role)
            self.instructions = {**self.instructions, role: instr}
        return instr


@dataclass(frozen=True)
class SessionState:
    session_id: str
    phase: Phase
    spec: TaskSpec
    config: SessionConfig
    plan: SubtaskPlan | None
    current_policy: Policy | None
    tuning_rounds_used: int
    escalations_used: int
    transcript: tuple[Message, ...]
    rng_seed: int

    def append(
        self,
        sender: Role | str,
        recipient: Role | str,
        kind: MessageKind,
        payload: Mapping[str, Any],
    ) -> "SessionState":
        msg = make_message(
            self.session_id, len(self.transcript), sender, recipient, kind, payload
        )
        return replace(self, transcript=self.transcript + (msg,))

    def latest(self, *kinds: MessageKind) -> Message | None:
        for msg in reversed(self.transcript):
            if msg.kind in kinds:
                return msg
        return None


class ScriptedFeedback:
    """Canned user verdicts for unattended runs; rejects once exhausted."""

    def __init__(self, feedbacks: Sequence[UserFeedback]):
        self.feedbacks = list(feedbacks)
        self.cursor = 0

    def __call__(self, state: SessionState) -> UserFeedback:
        if self.cursor >= len(self.feedbacks):
            return UserFeedback(Verdict.REJECT, notes="scripted feedback exhausted")
        fb = self.feedbacks[self.cursor]
        self.cursor += 1
        return fb


def start_session(
    spec: TaskSpec, config: SessionConfig, rng_seed: int = 0, session_id: str | None = None
) -> SessionState:
    """Open a session: validated spec becomes the Requirements message."""
    spec.validate()
    state = SessionState(
        session_id=session_id or new_session_id(),
        phase=Phase.INTAKE,
        spec=spec,
        config=config,
        plan=None,
        current_policy=None,
        tuning_rounds_used=0,
        escalations_used=0,
        transcript=(),
        rng_seed=rng_seed,
    )
    payload = {**spec.to_dict(), "notes": ""}
    return state.append(USER, Role.ANALYST, MessageKind.REQUIREMENTS, payload)


# --- backend invocation helpers ---------------------------------------------


def _ask(state: SessionState, deps: Deps, role: Role, bindings: Mapping[str, str], action: str) -> str:
    system = render_instruction(deps.instruction(role), bindings)
    req = ChatRequest(
        system=system,
        turns=(Turn(FRAMEWORK, action),),
        max_tokens=state.config.max_tokens,
        temperature=state.config.temperature,
    )
    return deps.backends[role].complete(req).content


def _strip_fences(text: str) -> str:
    text = text.strip()
    if text.startswith("```"):
        lines = text.splitlines()
        lines = lines[1:]
        if lines and lines[-1].strip() == "```":
            lines = lines[:-1]
        text = "\n".join(lines).strip()
    return text


def _parse_plan_response(content: str) -> tuple[SubtaskPlan, str]:
    """Read the analyst's JSON plan; a malformed response yields an empty
    plan (which plan validation will reject and route back)."""
    text = _strip_fences(content)
    try:
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ValueError("plan must be a JSON object")
    except ValueError:
        return SubtaskPlan(subtasks=()), f"unparseable analyst response: {content[:200]}"
    return SubtaskPlan.from_dict(data), ""


def _analyst_bindings(state: SessionState, context: str) -> dict[str, str]:
    spec = state.spec
    return {
        "robot_params": json.dumps(spec.robot_params.to_dict(), sort_keys=True),
        "requirements": "\n".join(f"- {r}" for r in spec.requirements),
        "constraints": "\n".join(f"- {c}" for c in spec.constraints) or "(none)",
        "context": context,
    }


def _run_analysis(state: SessionState, deps: Deps, action: str, context: str) -> SessionState:
    """Invoke the analyst and land its plan; the state enters Analysis."""
    content = _ask(state, deps, Role.ANALYST, _analyst_bindings(state, context), action)
    plan, problem = _parse_plan_response(content)
    payload = {**plan.to_dict(), "notes": problem}
    state = state.append(Role.ANALYST, Role.PROGRAMMER, MessageKind.PLAN, payload)
    return replace(state, plan=plan, phase=Phase.ANALYSIS)


# --- transcript queries -----------------------------------------------------


def _policy_fail_streak(state: SessionState) -> tuple[int, list[str]]:
    """Failed policy parses since the most recent plan, newest diagnostics."""
    count = 0
    diagnostics: list[str] = []
    for msg in reversed(state.transcript):
        if msg.kind is MessageKind.PLAN:
            break
        if msg.kind is MessageKind.PARSE_REPORT and msg.payload.get("subject") == "policy":
            if not msg.payload.get("ok"):
                count += 1
                if not diagnostics:
                    diagnostics = [str(d) for d in msg.payload.get("diagnostics", ())]
    return count, diagnostics


def _pending_feedback(state: SessionState) -> UserFeedback | None:
    msg = state.latest(
        MessageKind.USER_FEEDBACK, MessageKind.TEST_REPORT, MessageKind.TUNING_REPORT
    )
    if msg is not None and msg.kind is MessageKind.USER_FEEDBACK:
        return UserFeedback.from_dict(dict(msg.payload))
    return None


def _directive_from_dicts(dicts: Sequence[Mapping[str, Any]]) -> TuningDirective:
    return TuningDirective(
        hints=tuple(
            Hint(
                param_name=d.get("param_name"),
                direction=Direction(d.get("direction", "Free")),
                reason=str(d.get("reason", "")),
            )
            for d in dicts
        )
    )


def _collect_reports(state: SessionState) -> list[TestReport]:
    return [
        TestReport.from_payload(dict(m.payload))
        for m in state.transcript
        if m.kind is MessageKind.TEST_REPORT
    ]


def _collect_directives(state: SessionState) -> list[TuningDirective]:
    out = []
    for m in state.transcript:
        if m.kind is MessageKind.TUNING_REPORT and m.payload.get("directive"):
            out.append(_directive_from_dicts(m.payload["directive"]))
    return out


# --- the transition table ---------------------------------------------------


def step(state: SessionState, deps: Deps) -> SessionState:
    """Advance the session by exactly one phase transition.

    Backend failures (after the backend's own retry budget) terminate the
    session as Failed with a Failure message; they never propagate.
    """
    if state.phase in TERMINAL_PHASES:
        raise WrongPhase("any non-terminal phase", state.phase.value)
    try:
        return _HANDLERS[state.phase](state, deps)
    except BackendError as exc:
        state = state.append(
            Role.TESTER,
            USER,
            MessageKind.FAILURE,
            {"reason": f"backend failure: {exc}", "notes": ""},
        )
        return replace(state, phase=Phase.FAILED)


def _step_intake(state: SessionState, deps: Deps) -> SessionState:
    return _run_analysis(
        state,
        deps,
        action="TASK: produce a subtask plan for the requirements.",
        context="Initial analysis of the user requirements.",
    )


def _step_analysis(state: SessionState, deps: Deps) -> SessionState:
    assert state.plan is not None
    report = validate_plan(state.plan, state.spec)
    # hard violations and advisories share one list but stay distinguishable
    diagnostics = [f"{v.code}: {v.detail}" for v in report.violations] + [
        f"advisory {a.code}: {a.detail}" for a in report.advisories
    ]
    state = state.append(
        Role.ANALYST,
        USER,
        MessageKind.PARSE_REPORT,
        {"subject": "plan", "ok": report.ok, "diagnostics": diagnostics, "notes": ""},
    )
    return replace(state, phase=Phase.PLAN_VALIDATION)


def _step_plan_validation(state: SessionState, deps: Deps) -> SessionState:
    last = state.latest(MessageKind.PARSE_REPORT)
    assert last is not None and last.payload.get("subject") == "plan"
    if last.payload["ok"]:
        assert state.plan is not None
        state = state.append(
            Role.ANALYST,
            Role.PROGRAMMER,
            MessageKind.SUBTASK,
            {
                "subtasks": [s.to_dict() for s in state.plan.subtasks],
                "notes": "plan validated; implement each subtask in one policy",
            },
        )
        return replace(state, phase=Phase.CODEGEN)

    violations = "; ".join(str(d) for d in last.payload.get("diagnostics", ()))
    if state.escalations_used < state.config.k_replan:
        state = state.append(
            Role.ANALYST,
            Role.ANALYST,
            MessageKind.ESCALATION,
            {
                "reason": "plan failed validation",
                "violations": list(last.payload.get("diagnostics", ())),
                "notes": "",
            },
        )
        state = replace(state, escalations_used=state.escalations_used + 1)
        return _run_analysis(
            state,
            deps,
            action=f"TASK: revise the subtask plan; validation violations: {violations}",
            context=f"The previous plan failed validation: {violations}",
        )
    state = state.append(
        Role.TESTER,
        USER,
        MessageKind.FAILURE,
        {"reason": f"plan validation failed with no escalation budget left: {violations}", "notes": ""},
    )
    return replace(state, phase=Phase.FAILED)


def _step_codegen(state: SessionState, deps: Deps) -> SessionState:
    assert state.plan is not None
    fails, diagnostics = _policy_fail_streak(state)
    if fails:
        action = f"TASK: fix the policy; parse diagnostics: {'; '.join(diagnostics)}"
        context = f"Attempt {fails + 1}. Previous draft was rejected: {'; '.join(diagnostics)}"
    else:
        action = "TASK: write a drive policy implementing the plan."
        context = "First draft for this plan."
    bindings = {
        "plan": json.dumps(state.plan.to_dict(), indent=2, sort_keys=True),
        "context": context,
    }
    content = _ask(state, deps, Role.PROGRAMMER, bindings, action)
    source = _strip_fences(content)
    state = state.append(
        Role.PROGRAMMER, Role.TESTER, MessageKind.POLICY_DRAFT, {"source": source, "notes": ""}
    )
    return replace(state, phase=Phase.STATIC_VALIDATION)


def _step_static_validation(state: SessionState, deps: Deps) -> SessionState:
    draft = state.latest(MessageKind.POLICY_DRAFT)
    assert draft is not None
    source = str(draft.payload["source"])
    try:
        policy, warnings = parse_with_warnings(source)
    except (PolicySyntaxError, PolicyValidationError) as exc:
        diagnostics = exc.issues if isinstance(exc, PolicyValidationError) else [str(exc)]
        state = state.append(
            Role.TESTER,
            Role.PROGRAMMER,
            MessageKind.PARSE_REPORT,
            {"subject": "policy", "ok": False, "diagnostics": list(diagnostics), "notes": ""},
        )
        fails, _ = _policy_fail_streak(state)
        if fails <= state.config.k_adjust:
            return replace(state, phase=Phase.CODEGEN)
        return replace(state, phase=Phase.ESCALATION)

    state = state.append(
        Role.TESTER,
        Role.PROGRAMMER,
        MessageKind.PARSE_REPORT,
        {"subject": "policy", "ok": True, "diagnostics": list(warnings), "notes": ""},
    )
    return replace(state, current_policy=policy, phase=Phase.SIM_TEST)


def _narrate(state: SessionState, deps: Deps, report: TestReport) -> str:
    lines = "; ".join(
        f"{s['scenario']}: band={s['band_fraction']:.3f} rms={s['rms_dist_error']:.3f} "
        f"collisions={s['collisions']} lost={s['target_lost']}"
        for s in report.summaries
    )
    summary = f"passed={report.passed} objective={report.objective:.4f}; {lines}"
    return _ask(
        state,
        deps,
        Role.TESTER,
        {"test_summary": summary},
        f"TASK: narrate the test outcome. {summary}",
    )


def _step_sim_test(state: SessionState, deps: Deps) -> SessionState:
    assert state.current_policy is not None
    report = evaluate_suite(
        state.current_policy,
        deps.suite,
        state.config.thresholds,
        state.config.objective,
        seed=state.rng_seed,
    )
    notes = _narrate(state, deps, report)
    state = state.append(
        Role.TESTER, USER, MessageKind.TEST_REPORT, {**report.to_dict(), "notes": notes}
    )
    next_phase = Phase.USER_REVIEW if report.passed else Phase.TUNING
    return replace(state, phase=next_phase)


def _step_tuning(state: SessionState, deps: Deps) -> SessionState:
    assert state.current_policy is not None
    config = state.config
    if state.tuning_rounds_used >= config.k_adjust:
        state = state.append(
            Role.TESTER,
            USER,
            MessageKind.TUNING_REPORT,
            {
                "round": state.tuning_rounds_used,
                "updates": {},
                "notes": "adjustment budget exhausted; escalating to the analyst",
            },
        )
        return replace(state, phase=Phase.ESCALATION)

    directive: TuningDirective | None = None
    fb = _pending_feedback(state)
    if fb is not None and fb.verdict is Verdict.ADJUST:
        directive = feedback_to_directive(fb, state.current_policy)

    policy = state.current_policy
    if directive is not None:
        policy = apply_directive(policy, directive, config.nudge_fraction)
    outcome = tune(
        policy,
        deps.suite,
        config.objective,
        directive,
        config.tune_budget,
        seed=state.rng_seed,
    )
    payload: dict[str, Any] = {
        "round": state.tuning_rounds_used + 1,
        "updates": outcome.policy.param_values(),
        "notes": f"objective {outcome.history[0]['J']:.4f} -> {outcome.best_j:.4f}",
    }
    if directive is not None:
        payload["directive"] = directive.to_dicts()
    state = state.append(Role.TESTER, USER, MessageKind.TUNING_REPORT, payload)
    return replace(
        state,
        current_policy=outcome.policy,
        tuning_rounds_used=state.tuning_rounds_used + 1,
        phase=Phase.SIM_TEST,
    )


def _step_user_review(state: SessionState, deps: Deps) -> SessionState:
    fb = _pending_feedback(state)
    if fb is None:
        if deps.feedback_provider is None:
            raise MissingFeedback(
                "session is in UserReview and no feedback has been submitted"
            )
        fb = deps.feedback_provider(state)
        state = state.append(USER, Role.TESTER, MessageKind.USER_FEEDBACK, fb.to_dict())

    if fb.verdict is Verdict.APPROVE:
        assert state.current_policy is not None
        state = state.append(
            Role.TESTER,
            USER,
            MessageKind.ACCEPTANCE,
            {"policy_source": print_policy(state.current_policy), "notes": fb.notes},
        )
        return replace(state, phase=Phase.ACCEPTED)
    if fb.verdict is Verdict.ADJUST:
        # the only reset site for the adjustment budget
        return replace(state, phase=Phase.TUNING, tuning_rounds_used=0)
    return replace(state, phase=Phase.ESCALATION)


def _step_escalation(state: SessionState, deps: Deps) -> SessionState:
    reports = _collect_reports(state)
    if state.escalations_used < state.config.k_replan:
        esc = _escalation_report(state, reports)
        state = state.append(Role.TESTER, Role.ANALYST, MessageKind.ESCALATION, esc.to_payload())
        state = replace(
            state, escalations_used=state.escalations_used + 1, current_policy=None
        )
        return _run_analysis(
            state,
            deps,
            action=f"TASK: revise the plan after failed testing. {esc.reason}",
            context=f"Escalation from the tester: {esc.reason}. "
            f"Violations: {'; '.join(esc.violations) or '(none)'}",
        )
    reason = "escalation budget exhausted"
    if reports and not reports[-1].passed:
        reason += f"; last objective {reports[-1].objective:.4f}"
    state = state.append(
        Role.TESTER, USER, MessageKind.FAILURE, {"reason": reason, "notes": ""}
    )
    return replace(state, phase=Phase.FAILED)


def _escalation_report(state: SessionState, reports: list[TestReport]) -> EscalationReport:
    directives = _collect_directives(state)
    if any(not r.passed for r in reports):
        return compose_escalation(reports, directives)
    # the user rejected a passing result; surface their words instead
    fb = _pending_feedback(state)
    notes = fb.notes if fb is not None else ""
    return EscalationReport(
        reason=f"user rejected the result: {notes or 'no reason given'}",
        worst_scenario="",
        violations=(),
        param_history=tuple(dict(r.params) for r in reports),
        tried_directions=tuple(d for dv in directives for d in dv.to_dicts()),
    )


_HANDLERS: dict[Phase, Callable[[SessionState, Deps], SessionState]] = {
    Phase.INTAKE: _step_intake,
    Phase.ANALYSIS: _step_analysis,
    Phase.PLAN_VALIDATION: _step_plan_validation,
    Phase.CODEGEN: _step_codegen,
    Phase.STATIC_VALIDATION: _step_static_validation,
    Phase.SIM_TEST: _step_sim_test,
    Phase.TUNING: _step_tuning,
    Phase.USER_REVIEW: _step_user_review,
    Phase.ESCALATION: _step_escalation,
}


def submit_user_feedback(state: SessionState, fb: UserFeedback) -> SessionState:
    """Record the human verdict; the next step() acts on it."""
    if state.phase is not Phase.USER_REVIEW:
        raise WrongPhase(Phase.USER_REVIEW.value, state.phase.value)
    return state.append(USER, Role.TESTER, MessageKind.USER_FEEDBACK, fb.to_dict())


def step_bound(config: SessionConfig) -> int:
    """A loose but finite ceiling on steps for any session under this config."""
    return 40 * (config.k_adjust + 2) * (config.k_replan + 2)


def run_to_completion(
    state: SessionState, deps: Deps, max_steps: int | None = None
) -> SessionState:
    """Step until Accepted or Failed; the step count is provably bounded."""
    bound = max_steps if max_steps is not None else step_bound(state.config)
    for _ in range(bound):
        if state.phase in TERMINAL_PHASES:
            return state
        state = step(state, deps)
    if state.phase in TERMINAL_PHASES:
        return state
    raise RuntimeError(f"session exceeded its step bound of {bound}")
