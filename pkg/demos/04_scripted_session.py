"""A whole development session, end to end, with scripted collaborators.

The bundled assets script an analyst, a programmer, and a tester through one
happy path: plan, policy draft, simulated testing, and user approval. The
same machinery drives live HTTP-backed models; only the backend changes.

Run with:  python3 demos/04_scripted_session.py
"""
import os

import yaml

from crewforge import (
    Deps,
    Phase,
    ScriptedFeedback,
    TaskSpec,
    UserFeedback,
    Verdict,
    default_config,
    happy_path_dir,
    make_backends,
    resolve_suite,
    start_session,
    step,
)

TERMINAL = {Phase.ACCEPTED, Phase.FAILED}


def main() -> None:
    with open(os.path.join(happy_path_dir(), "taskspec.yaml")) as fh:
        spec = TaskSpec.from_dict(yaml.safe_load(fh))
    config = default_config()
    deps = Deps(
        backends=make_backends(config),
        suite=resolve_suite(config),
        feedback_provider=ScriptedFeedback(
            [UserFeedback(Verdict.APPROVE, notes="demo run")]
        ),
    )

    state = start_session(spec, config, rng_seed=0)
    print(f"session {state.session_id}\n")
    seen = 0
    while state.phase not in TERMINAL:
        state = step(state, deps)
        for msg in state.transcript[seen:]:
            route = f"{msg.to_dict()['from']} -> {msg.to_dict()['to']}"
            print(f"  [{msg.seq}] {route:22s} {msg.kind.value}")
        seen = len(state.transcript)
        print(f"      phase: {state.phase.value}")

    print(f"\nfinal phase: {state.phase.value}")
    print(f"messages exchanged: {len(state.transcript)}")
    print(f"escalations used: {state.escalations_used}")
    if state.current_policy is not None:
        values = state.current_policy.param_values()
        print(f"accepted parameters: {values}")


if __name__ == "__main__":
    main()
