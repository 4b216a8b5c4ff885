"""Collaborative development of robot drive policies by role-playing LLMs.

Three roles — analyst, programmer, tester — cooperate over a typed message
transcript to produce a target-following drive policy, exercise it in a 2D
kinematic simulator, tune its parameters against an objective, and loop in a
human reviewer before acceptance.
"""
from .backend import (
    CallLog,
    ChatBackend,
    ChatRequest,
    ChatResponse,
    HttpChatBackend,
    ScriptedBackend,
    Turn,
    load_script,
)
from .config import (
    BackendConfig,
    SessionConfig,
    config_from_dict,
    default_config,
    happy_path_dir,
    load_config,
    make_backends,
    resolve_suite,
)
from .dsl import Policy, compile_policy, evaluate, parse, print_policy, set_params
from .errors import (
    BackendError,
    CrewforgeError,
    InvalidSpec,
    MissingFeedback,
    PolicySyntaxError,
    PolicyValidationError,
    WrongPhase,
)
from .orchestrator import (
    Deps,
    Phase,
    ScriptedFeedback,
    SessionState,
    TERMINAL_PHASES,
    run_to_completion,
    start_session,
    step,
    submit_user_feedback,
)
from .roles import Message, MessageKind, Role, RoleInstruction, TaskSpec
from .sim import (
    Scenario,
    ScenarioResult,
    SensorFrame,
    builtin_suite,
    export_trajectory,
    load_scenarios,
    run_scenario,
)
from .store import SessionStore, canonical_transcript
from .tester import (
    Direction,
    FeedbackCategory,
    Hint,
    MetricThresholds,
    Objective,
    TestReport,
    TuneBudget,
    TuningDirective,
    UserFeedback,
    Verdict,
    apply_directive,
    evaluate_suite,
    feedback_to_directive,
    minimize_params,
    tune,
)

__version__ = "0.1.0"

__all__ = [
    "BackendConfig",
    "BackendError",
    "CallLog",
    "ChatBackend",
    "ChatRequest",
    "ChatResponse",
    "CrewforgeError",
    "Deps",
    "Direction",
    "FeedbackCategory",
    "Hint",
    "HttpChatBackend",
    "InvalidSpec",
    "Message",
    "MessageKind",
    "MetricThresholds",
    "MissingFeedback",
    "Objective",
    "Phase",
    "Policy",
    "PolicySyntaxError",
    "PolicyValidationError",
    "Role",
    "RoleInstruction",
    "Scenario",
    "ScenarioResult",
    "ScriptedBackend",
    "ScriptedFeedback",
    "SensorFrame",
    "SessionConfig",
    "SessionState",
    "SessionStore",
    "TERMINAL_PHASES",
    "TaskSpec",
    "TestReport",
    "TuneBudget",
    "TuningDirective",
    "Turn",
    "UserFeedback",
    "Verdict",
    "WrongPhase",
    "builtin_suite",
    "canonical_transcript",
    "compile_policy",
    "config_from_dict",
    "default_config",
    "evaluate",
    "apply_directive",
    "evaluate_suite",
    "export_trajectory",
    "feedback_to_directive",
    "happy_path_dir",
    "load_config",
    "load_scenarios",
    "load_script",
    "make_backends",
    "parse",
    "print_policy",
    "resolve_suite",
    "run_scenario",
    "run_to_completion",
    "set_params",
    "start_session",
    "step",
    "submit_user_feedback",
    "minimize_params",
    "tune",
]
