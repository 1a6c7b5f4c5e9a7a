import json

import pytest

from aamatrix.scenario import Scenario, parse_scenario

ASPECT_KEYS = [
    "decom", "orch", "synth", "commp", "preng", "actm",
    "agen", "roled", "memu", "netm", "integ", "util",
]


def aspect_levels(au=0, al=0, **overrides):
    """All twelve aspects at (au, al), with per-key {"au":..,"al":..} overrides."""
    levels = {key: {"au": au, "al": al} for key in ASPECT_KEYS}
    for key, value in overrides.items():
        levels[key] = value
    return levels


def scenario_doc(
    goal="write A; write B",
    aspects=None,
    protocol=None,
    rules=None,
    default_response="ok",
    budgets=None,
    registry=None,
    **extra,
):
    """A two-agent dialogue scenario document with sensible defaults."""
    doc = {
        "goal": {"text": goal},
        "aspects": aspects or aspect_levels(),
        "roster": [
            {"id": "planner", "agent_type": "TaskCreation", "peers": ["executor"]},
            {"id": "executor", "agent_type": "TaskExecution"},
        ],
        "protocol": protocol
        or {
            "kind": "DialogueCycle",
            "instructor": "planner",
            "executor": "executor",
            "evaluate": False,
        },
        "backend": {
            "kind": "Scripted",
            "script": {"rules": rules or [], "default_response": default_response},
        },
        "budgets": budgets
        or {"max_actions": 80, "max_protocol_cycles": 30, "repeat_state_limit": 12},
    }
    if registry is not None:
        doc["registry"] = registry
    doc.update(extra)
    return doc


def build_scenario(**kwargs) -> Scenario:
    return parse_scenario(json.dumps(scenario_doc(**kwargs)))


@pytest.fixture
def basic_doc():
    return scenario_doc(
        rules=[
            {
                "match": {"action_kind": "ExecuteTask", "prompt_substring": "write A"},
                "response": "payload-A",
            },
            {
                "match": {"action_kind": "ExecuteTask", "prompt_substring": "write B"},
                "response": "payload-B",
            },
        ]
    )
