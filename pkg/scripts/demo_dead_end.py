#!/usr/bin/env python3
"""Static analysis vs. dynamic failure, side by side.

Builds a mixed-autonomy configuration (self-organizing decomposition,
collaboration, and resource utilization over a static integration layer),
shows the conflicts the dependency analyzer predicts, then executes the
matching scenario and prints the dead end it actually hits.
"""

import json

from aamatrix.dependencies import detect_conflicts
from aamatrix.engine import run
from aamatrix.profiles import profile_from_levels
from aamatrix.scenario import parse_scenario
from aamatrix.taxonomy import ASPECT_ORDER, AspectId

HIGH = {AspectId.DECOM, AspectId.COMMP, AspectId.ACTM, AspectId.UTIL}

SCENARIO = {
    "goal": {"text": "translate the quarterly report"},
    "aspects": {
        a.key: {"au": 2 if a in HIGH else 0, "al": 0} for a in ASPECT_ORDER
    },
    "roster": [
        {"id": "planner", "agent_type": "TaskCreation", "peers": ["executor"]},
        {"id": "executor", "agent_type": "TaskExecution"},
    ],
    "protocol": {
        "kind": "DialogueCycle",
        "instructor": "planner",
        "executor": "executor",
        "evaluate": False,
    },
    "registry": {
        "resources": [
            {
                "id": "translator1",
                "kind": "Model",
                "subkind": "NLP",
                "state": "Catalog",
                "capabilities": ["translate"],
                "handler": "echo",
            }
        ]
    },
    "backend": {
        "kind": "Scripted",
        "script": {
            "rules": [
                {
                    "match": {"action_kind": "DecomposeTask"},
                    "response": "1. translate the report [needs:translate]",
                }
            ],
            "default_response": "ok",
        },
    },
    "budgets": {"max_actions": 40, "max_protocol_cycles": 20, "repeat_state_limit": 8},
}


def main():
    levels = []
    for aspect in ASPECT_ORDER:
        levels.extend((2 if aspect in HIGH else 0, 0))
    profile = profile_from_levels("mixed-autonomy-example", levels)

    print("= static prediction =")
    for conflict in detect_conflicts(profile):
        if conflict.severity.value == "High":
            print(f"  HIGH  {conflict.dependent.value} -> {conflict.dependency.value}")

    print("\n= dynamic run =")
    result = run(parse_scenario(json.dumps(SCENARIO)))
    print(f"  outcome: {result.outcome.status.value}")
    print(f"  detail:  {result.outcome.detail}")


if __name__ == "__main__":
    main()
