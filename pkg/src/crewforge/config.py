"""Session configuration: retry/escalation budgets, suite, backends, service.

One YAML file configures a whole session. Relative paths inside the file
(scenario suite, script files) resolve against the file's own directory, so
a config travels with its assets.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Mapping

import yaml

from .backend import CallLog, ChatBackend, HttpChatBackend, ScriptedBackend, load_script
from .errors import InvalidSpec
from .roles import Role
from .sim import Scenario, builtin_suite, load_scenarios
from .tester import MetricThresholds, Objective, TuneBudget

BUILTIN_SUITE = "builtin"
DEFAULT_PORT = 7340


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "scripted"  # "scripted" | "http"
    base_url: str = "http://localhost:8000/v1"
    model: str = "default"
    timeout_ms: int = 30_000
    scripts: Mapping[str, str] = field(default_factory=dict)  # role -> script path

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "base_url": self.base_url,
            "model": self.model,
            "timeout_ms": self.timeout_ms,
            "scripts": dict(self.scripts),
        }


@dataclass(frozen=True)
class SessionConfig:
    k_adjust: int = 3
    k_replan: int = 2
    scenario_suite: str = BUILTIN_SUITE
    thresholds: MetricThresholds = MetricThresholds()
    objective: Objective = Objective()
    tune_budget: TuneBudget = TuneBudget()
    nudge_fraction: float = 0.1
    backend: BackendConfig = BackendConfig()
    max_tokens: int = 1024
    temperature: float = 0.0
    sessions_dir: str = "sessions"
    long_poll_s: float = 25.0
    port: int = DEFAULT_PORT

    def __post_init__(self) -> None:
        if self.k_adjust < 1:
            raise InvalidSpec(["k_adjust: must be >= 1"])
        if self.k_replan < 0:
            raise InvalidSpec(["k_replan: must be >= 0"])

    def to_dict(self) -> dict[str, Any]:
        return {
            "k_adjust": self.k_adjust,
            "k_replan": self.k_replan,
            "scenario_suite": self.scenario_suite,
            "thresholds": self.thresholds.to_dict(),
            "objective": self.objective.to_dict(),
            "tuning": {
                "rounds": self.tune_budget.rounds,
                "evals_per_round": self.tune_budget.evals_per_round,
                "nudge_fraction": self.nudge_fraction,
            },
            "backend": self.backend.to_dict(),
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
            "sessions_dir": self.sessions_dir,
            "service": {"long_poll_s": self.long_poll_s, "port": self.port},
        }


def _resolve(base_dir: str, path: str) -> str:
    if path == BUILTIN_SUITE or os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base_dir, path))


def config_from_dict(data: Mapping[str, Any], base_dir: str = ".") -> SessionConfig:
    tuning = data.get("tuning", {})
    backend_d = data.get("backend", {})
    service = data.get("service", {})
    scripts = {
        str(role): _resolve(base_dir, str(path))
        for role, path in (backend_d.get("scripts") or {}).items()
    }
    epr = tuning.get("evals_per_round")
    return SessionConfig(
        k_adjust=int(data.get("k_adjust", 3)),
        k_replan=int(data.get("k_replan", 2)),
        scenario_suite=_resolve(base_dir, str(data.get("scenario_suite", BUILTIN_SUITE))),
        thresholds=MetricThresholds.from_dict(data.get("thresholds", {})),
        objective=Objective.from_dict(data.get("objective", {})),
        tune_budget=TuneBudget(
            rounds=int(tuning.get("rounds", 6)),
            evals_per_round=None if epr is None else int(epr),
        ),
        nudge_fraction=float(tuning.get("nudge_fraction", 0.1)),
        backend=BackendConfig(
            kind=str(backend_d.get("kind", "scripted")),
            base_url=str(backend_d.get("base_url", "http://localhost:8000/v1")),
            model=str(backend_d.get("model", "default")),
            timeout_ms=int(backend_d.get("timeout_ms", 30_000)),
            scripts=scripts,
        ),
        max_tokens=int(data.get("max_tokens", 1024)),
        temperature=float(data.get("temperature", 0.0)),
        # session output lands relative to the working directory, not the
        # config file: configs ship inside read-only assets
        sessions_dir=str(data.get("sessions_dir", "sessions")),
        long_poll_s=float(service.get("long_poll_s", 25.0)),
        port=int(service.get("port", DEFAULT_PORT)),
    )


def load_config(path: str) -> SessionConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, Mapping):
        raise InvalidSpec([f"{path}: config must be a mapping"])
    return config_from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))


def happy_path_dir() -> str:
    """Directory of the shipped demonstration assets (config, spec, scripts)."""
    return str(resources.files("crewforge") / "assets" / "happy_path")


def default_config() -> SessionConfig:
    return load_config(os.path.join(happy_path_dir(), "config.yaml"))


def resolve_suite(config: SessionConfig) -> list[Scenario]:
    if config.scenario_suite == BUILTIN_SUITE:
        return builtin_suite()
    return load_scenarios(config.scenario_suite)


def make_backends(config: SessionConfig, log: CallLog | None = None) -> dict[Role, ChatBackend]:
    """Instantiate one backend per role according to the binding config.

    Scripted backends are per-session instances (each owns its cursor), so
    call this once per session, not once per process.
    """
    backends: dict[Role, ChatBackend] = {}
    if config.backend.kind == "scripted":
        for role in Role:
            path = config.backend.scripts.get(role.value)
            if path is None:
                raise InvalidSpec(
                    [f"backend.scripts.{role.value}: scripted backend needs a script path"]
                )
            backends[role] = ScriptedBackend(load_script(path), log=log)
    elif config.backend.kind == "http":
        for role in Role:
            backends[role] = HttpChatBackend(
                base_url=config.backend.base_url,
                model=config.backend.model,
                timeout_ms=config.backend.timeout_ms,
                log=log,
            )
    else:
        raise InvalidSpec([f"backend.kind: unknown backend kind {config.backend.kind!r}"])
    return backends
