"""Collaboration roles, instruction templates, and the typed message vocabulary.

Three fixed roles (analyst, programmer, tester) cooperate on a robot-development
task. Everything they exchange is a typed `Message` with a structured payload;
free prose from a model goes into the payload's ``notes`` field so that control
flow never depends on unparsed text.
"""
from __future__ import annotations

import re
import time
import uuid
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Any, Mapping, Union

from .errors import InvalidSpec, MissingPlaceholder, UnknownPlaceholder

USER = "user"


class Role(str, Enum):
    """The three collaboration roles. No session holds two agents of one kind."""

    ANALYST = "analyst"
    PROGRAMMER = "programmer"
    TESTER = "tester"


Party = Union[Role, str]  # a Role or the USER sentinel


def party_value(p: Party) -> str:
    return p.value if isinstance(p, Role) else str(p)


def party_from_value(v: str) -> Party:
    return USER if v == USER else Role(v)


class MessageKind(str, Enum):
    REQUIREMENTS = "requirements"
    PLAN = "plan"
    SUBTASK = "subtask"
    POLICY_DRAFT = "policy_draft"
    PARSE_REPORT = "parse_report"
    TEST_REPORT = "test_report"
    TUNING_REPORT = "tuning_report"
    USER_FEEDBACK = "user_feedback"
    ESCALATION = "escalation"
    ACCEPTANCE = "acceptance"
    FAILURE = "failure"


# Required payload keys per kind, with accepted types. Extra keys are allowed;
# missing or mistyped required keys make the payload invalid for that kind.
_PAYLOAD_SCHEMAS: dict[MessageKind, dict[str, tuple[type, ...]]] = {
    MessageKind.REQUIREMENTS: {
        "robot_params": (dict,),
        "requirements": (list,),
        "constraints": (list,),
        "notes": (str,),
    },
    MessageKind.PLAN: {"subtasks": (list,), "rationale": (str,), "notes": (str,)},
    MessageKind.SUBTASK: {"subtasks": (list,), "notes": (str,)},
    MessageKind.POLICY_DRAFT: {"source": (str,), "notes": (str,)},
    MessageKind.PARSE_REPORT: {
        "subject": (str,),
        "ok": (bool,),
        "diagnostics": (list,),
        "notes": (str,),
    },
    MessageKind.TEST_REPORT: {
        "passed": (bool,),
        "objective": (int, float),
        "scenarios": (list,),
        "notes": (str,),
    },
    MessageKind.TUNING_REPORT: {
        "round": (int,),
        "updates": (dict,),
        "notes": (str,),
    },
    MessageKind.USER_FEEDBACK: {"verdict": (str,), "categories": (list,), "notes": (str,)},
    MessageKind.ESCALATION: {"reason": (str,), "notes": (str,)},
    MessageKind.ACCEPTANCE: {"policy_source": (str,), "notes": (str,)},
    MessageKind.FAILURE: {"reason": (str,), "notes": (str,)},
}

_SUBTASK_KEYS = ("id", "title", "behavior", "acceptance")


def validate_payload(kind: MessageKind, payload: Any) -> bool:
    """Total check that a payload carries the structure its kind requires."""
    if not isinstance(payload, dict) or not payload:
        return False
    schema = _PAYLOAD_SCHEMAS[kind]
    for key, types in schema.items():
        if key not in payload:
            return False
        value = payload[key]
        # bool is an int subclass; keep the two apart for numeric fields
        if isinstance(value, bool) and bool not in types:
            return False
        if not isinstance(value, types):
            return False
    if kind in (MessageKind.PLAN, MessageKind.SUBTASK):
        for item in payload["subtasks"]:
            if not isinstance(item, dict):
                return False
            if any(not isinstance(item.get(k), str) for k in _SUBTASK_KEYS):
                return False
    if kind is MessageKind.PARSE_REPORT and payload["subject"] not in ("plan", "policy"):
        return False
    return True


@dataclass(frozen=True)
class Message:
    """One typed communication in a session transcript.

    seq values are assigned by the transcript and are gapless from 0.
    Requirements never go to the programmer or tester: that division of
    labor is part of the collaboration contract and is enforced here.
    """

    session_id: str
    seq: int
    sender: Party
    recipient: Party
    kind: MessageKind
    payload: Mapping[str, Any]
    timestamp: float

    def __post_init__(self) -> None:
        if self.seq < 0:
            raise ValueError("seq must be >= 0")
        if not validate_payload(self.kind, dict(self.payload)):
            raise ValueError(f"payload does not match schema for kind {self.kind.value}")
        if self.kind is MessageKind.REQUIREMENTS and self.recipient != Role.ANALYST:
            raise ValueError("requirements may only be addressed to the analyst")

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "seq": self.seq,
            "from": party_value(self.sender),
            "to": party_value(self.recipient),
            "kind": self.kind.value,
            "payload": dict(self.payload),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Message":
        return cls(
            session_id=d["session_id"],
            seq=int(d["seq"]),
            sender=party_from_value(d["from"]),
            recipient=party_from_value(d["to"]),
            kind=MessageKind(d["kind"]),
            payload=dict(d["payload"]),
            timestamp=float(d["timestamp"]),
        )


def make_message(
    session_id: str,
    seq: int,
    sender: Party,
    recipient: Party,
    kind: MessageKind,
    payload: Mapping[str, Any],
) -> Message:
    return Message(
        session_id=session_id,
        seq=seq,
        sender=sender,
        recipient=recipient,
        kind=kind,
        payload=payload,
        timestamp=time.time(),
    )


def new_session_id() -> str:
    return uuid.uuid4().hex[:12]


# --- task specification -----------------------------------------------------


@dataclass(frozen=True)
class RobotParams:
    """Physical envelope of the robot under development. SI units throughout."""

    max_linear_speed_mps: float
    max_angular_speed_radps: float
    robot_radius_m: float
    sensor_range_m: float

    def to_dict(self) -> dict[str, float]:
        return {
            "max_linear_speed_mps": self.max_linear_speed_mps,
            "max_angular_speed_radps": self.max_angular_speed_radps,
            "robot_radius_m": self.robot_radius_m,
            "sensor_range_m": self.sensor_range_m,
        }


_ROBOT_FIELD_LABELS = {
    "max_linear_speed_mps": "max linear speed",
    "max_angular_speed_radps": "max angular speed",
    "robot_radius_m": "robot radius",
    "sensor_range_m": "sensor range",
}


@dataclass(frozen=True)
class TaskSpec:
    """What the user wants built: robot envelope, requirements, constraints."""

    robot_params: RobotParams
    requirements: tuple[str, ...]
    constraints: tuple[str, ...] = ()

    def validation_errors(self) -> list[str]:
        errors = []
        for name, label in _ROBOT_FIELD_LABELS.items():
            value = getattr(self.robot_params, name)
            if not value > 0:
                errors.append(f"robot_params.{name}: {label} must be > 0")
        if not self.requirements:
            errors.append("requirements: must list at least one functional requirement")
        return errors

    def validate(self) -> None:
        errors = self.validation_errors()
        if errors:
            raise InvalidSpec(errors)

    def to_dict(self) -> dict[str, Any]:
        return {
            "robot_params": self.robot_params.to_dict(),
            "requirements": list(self.requirements),
            "constraints": list(self.constraints),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TaskSpec":
        rp = d.get("robot_params") or {}
        return cls(
            robot_params=RobotParams(
                max_linear_speed_mps=float(rp.get("max_linear_speed_mps", 0.0)),
                max_angular_speed_radps=float(rp.get("max_angular_speed_radps", 0.0)),
                robot_radius_m=float(rp.get("robot_radius_m", 0.0)),
                sensor_range_m=float(rp.get("sensor_range_m", 0.0)),
            ),
            requirements=tuple(str(r) for r in d.get("requirements", ())),
            constraints=tuple(str(c) for c in d.get("constraints", ())),
        )


# --- subtask plans ----------------------------------------------------------


@dataclass(frozen=True)
class Subtask:
    id: str
    title: str
    behavior: str
    acceptance: str

    def to_dict(self) -> dict[str, str]:
        return {
            "id": self.id,
            "title": self.title,
            "behavior": self.behavior,
            "acceptance": self.acceptance,
        }


@dataclass(frozen=True)
class SubtaskPlan:
    """Ordered breakdown of the task, produced by the analyst."""

    subtasks: tuple[Subtask, ...]
    rationale: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "subtasks": [s.to_dict() for s in self.subtasks],
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SubtaskPlan":
        subtasks = tuple(
            Subtask(
                id=str(s.get("id", "")),
                title=str(s.get("title", "")),
                behavior=str(s.get("behavior", "")),
                acceptance=str(s.get("acceptance", "")),
            )
            for s in d.get("subtasks", ())
            if isinstance(s, Mapping)
        )
        return cls(subtasks=subtasks, rationale=str(d.get("rationale", "")))


@dataclass(frozen=True)
class PlanIssue:
    code: str
    detail: str

    def to_dict(self) -> dict[str, str]:
        return {"code": self.code, "detail": self.detail}


@dataclass(frozen=True)
class PlanReport:
    """Outcome of checking a plan. Hard violations flip ok; advisories do not."""

    ok: bool
    violations: tuple[PlanIssue, ...] = ()
    advisories: tuple[PlanIssue, ...] = ()

    def to_dicts(self) -> list[dict[str, str]]:
        return [v.to_dict() for v in self.violations] + [
            {**a.to_dict(), "severity": "advisory"} for a in self.advisories
        ]


_STOPWORDS = frozenset(
    "the and with from that must should while when robot this then also keep".split()
)


def _requirement_keywords(spec: TaskSpec) -> set[str]:
    words: set[str] = set()
    for text in spec.requirements:
        for w in re.findall(r"[a-z]{4,}", text.lower()):
            if w not in _STOPWORDS:
                words.add(w)
    return words


def validate_plan(plan: SubtaskPlan, spec: TaskSpec) -> PlanReport:
    """Check a subtask plan against the task spec.

    Hard violations: empty plan, duplicate subtask ids, missing acceptance
    notes. Advisory only: a subtask whose text shares no keyword with any
    requirement (it may still be legitimate glue work).
    """
    violations: list[PlanIssue] = []
    advisories: list[PlanIssue] = []
    if not plan.subtasks:
        violations.append(PlanIssue("EmptyPlan", "plan contains no subtasks"))
    seen: set[str] = set()
    for st in plan.subtasks:
        if st.id in seen:
            violations.append(PlanIssue("DuplicateId", st.id))
        seen.add(st.id)
        if not st.acceptance.strip():
            violations.append(PlanIssue("MissingAcceptance", st.id))
    keywords = _requirement_keywords(spec)
    for st in plan.subtasks:
        text = f"{st.id} {st.title} {st.behavior}".lower()
        if keywords and not any(k in text for k in keywords):
            advisories.append(PlanIssue("NoRequirementKeyword", st.id))
    return PlanReport(ok=not violations, violations=tuple(violations), advisories=tuple(advisories))


# --- instruction templates --------------------------------------------------

# {{ and }} are literal-brace escapes; {name} is a placeholder.
_TOKEN_RE = re.compile(r"\{\{|\}\}|\{([A-Za-z_][A-Za-z0-9_]*)\}")


def extract_placeholders(template: str) -> frozenset[str]:
    return frozenset(m.group(1) for m in _TOKEN_RE.finditer(template) if m.group(1))


@dataclass(frozen=True)
class RoleInstruction:
    """A role identity plus its prompt template with named placeholders."""

    role: Role
    template: str
    placeholder_names: frozenset[str]

    def __post_init__(self) -> None:
        found = extract_placeholders(self.template)
        undeclared = found - self.placeholder_names
        if undeclared:
            raise ValueError(f"template uses undeclared placeholders: {sorted(undeclared)}")

    @classmethod
    def from_template(cls, role: Role, template: str) -> "RoleInstruction":
        return cls(role=role, template=template, placeholder_names=extract_placeholders(template))


def render_instruction(instr: RoleInstruction, bindings: Mapping[str, str]) -> str:
    """Render a template with a complete placeholder map.

    Single pass: placeholder markers inside substituted values are not
    rescanned, and non-placeholder text is preserved verbatim apart from
    resolving the {{ / }} escapes.
    """
    missing = sorted(instr.placeholder_names - set(bindings))
    if missing:
        raise MissingPlaceholder(missing[0])
    extra = sorted(set(bindings) - instr.placeholder_names)
    if extra:
        raise UnknownPlaceholder(extra[0])

    def _sub(m: re.Match[str]) -> str:
        tok = m.group(0)
        if tok == "{{":
            return "{"
        if tok == "}}":
            return "}"
        return str(bindings[m.group(1)])

    return _TOKEN_RE.sub(_sub, instr.template)


def load_default_instruction(role: Role) -> RoleInstruction:
    """Load the shipped prompt template for a role from package data."""
    text = (resources.files("crewforge") / "templates" / f"{role.value}.txt").read_text(
        encoding="utf-8"
    )
    return RoleInstruction.from_template(role, text)


def load_instruction_file(role: Role, path: str) -> RoleInstruction:
    with open(path, "r", encoding="utf-8") as fh:
        return RoleInstruction.from_template(role, fh.read())
