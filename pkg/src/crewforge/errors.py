"""Exception types shared across the package."""
from __future__ import annotations


class CrewforgeError(Exception):
    """Base class for all crewforge errors."""


# --- instruction rendering ---

class MissingPlaceholder(CrewforgeError):
    """A template placeholder has no binding."""

    def __init__(self, name: str):
        super().__init__(f"missing binding for placeholder {name!r}")
        self.name = name


class UnknownPlaceholder(CrewforgeError):
    """A binding was supplied for a name the template does not declare."""

    def __init__(self, name: str):
        super().__init__(f"binding {name!r} is not a declared placeholder")
        self.name = name


# --- policy DSL ---

class PolicySyntaxError(CrewforgeError):
    """Source text does not conform to the policy grammar."""

    def __init__(self, line: int, col: int, msg: str):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col
        self.msg = msg


class PolicyValidationError(CrewforgeError):
    """Parsed policy violates a semantic rule (vocabulary, bounds, types)."""

    def __init__(self, issues: list[str]):
        super().__init__("; ".join(issues))
        self.issues = list(issues)


class UnknownParam(CrewforgeError):
    def __init__(self, name: str):
        super().__init__(f"policy has no parameter {name!r}")
        self.name = name


# --- backends ---

class BackendError(CrewforgeError):
    """Base for all LLM-backend failures; the orchestrator maps these to Failed."""


class ScriptExhausted(BackendError):
    def __init__(self, cursor: int):
        super().__init__(f"scripted backend exhausted after {cursor} responses")
        self.cursor = cursor


class ScriptMismatch(BackendError):
    def __init__(self, expected_pattern: str, got: str):
        super().__init__(
            f"scripted backend expected pattern {expected_pattern!r} "
            f"in last framework turn, got: {got[:120]!r}"
        )
        self.expected_pattern = expected_pattern


class HttpTimeout(BackendError):
    pass


class HttpStatus(BackendError):
    def __init__(self, code: int, body: str = ""):
        super().__init__(f"HTTP {code}: {body[:200]}")
        self.code = code


class MalformedResponse(BackendError):
    pass


# --- orchestration ---

class InvalidSpec(CrewforgeError):
    """Task spec violates its invariants; carries per-field diagnostics."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


class WrongPhase(CrewforgeError):
    def __init__(self, expected: str, actual: str):
        super().__init__(f"operation legal only in phase {expected}, session is in {actual}")
        self.expected = expected
        self.actual = actual


class MissingFeedback(CrewforgeError):
    """step() was called in UserReview with no feedback submitted since the last report."""


# --- tester ---

class WrongVerdict(CrewforgeError):
    def __init__(self, verdict: str):
        super().__init__(f"directives can only be derived from Adjust feedback, got {verdict}")
        self.verdict = verdict


class NoParams(CrewforgeError):
    """Tuning requested on a policy with zero parameters; grounds for escalation."""


class NothingToEscalate(CrewforgeError):
    """compose_escalation called with all reports passing."""
