from __future__ import annotations

import os
from typing import Any, Callable, Mapping

import pytest
import yaml

from crewforge.config import SessionConfig, config_from_dict, happy_path_dir, load_config
from crewforge.orchestrator import Deps
from crewforge.roles import TaskSpec
from crewforge.config import make_backends, resolve_suite

PROPORTIONAL_POLICY = """
policy follow {
  param kp = 1.0 [0.1, 4.0]
  param kw = 2.0 [0.5, 4.0]

  rule follow: when true ->
    drive(v = clamp(kp * (dist_to_target - 1.5), 0.0, 0.8),
          w = clamp(kw * bearing_to_target, -1.0, 1.0))
}
"""


@pytest.fixture(scope="session")
def happy_dir() -> str:
    return happy_path_dir()


@pytest.fixture()
def happy_spec(happy_dir: str) -> TaskSpec:
    with open(os.path.join(happy_dir, "taskspec.yaml"), "r", encoding="utf-8") as fh:
        return TaskSpec.from_dict(yaml.safe_load(fh))


@pytest.fixture()
def happy_config(happy_dir: str, tmp_path) -> SessionConfig:
    config = load_config(os.path.join(happy_dir, "config.yaml"))
    data = config.to_dict()
    data["sessions_dir"] = str(tmp_path / "sessions")
    return config_from_dict(data)


@pytest.fixture()
def make_config(happy_config: SessionConfig) -> Callable[..., SessionConfig]:
    """Happy-path config with overrides merged in (one level deep)."""

    def factory(**overrides: Any) -> SessionConfig:
        data = happy_config.to_dict()
        for key, value in overrides.items():
            if isinstance(value, Mapping) and isinstance(data.get(key), dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return config_from_dict(data)

    return factory


@pytest.fixture()
def make_deps() -> Callable[[SessionConfig], Deps]:
    def factory(config: SessionConfig, **kwargs: Any) -> Deps:
        return Deps(
            backends=make_backends(config),
            suite=resolve_suite(config),
            **kwargs,
        )

    return factory
