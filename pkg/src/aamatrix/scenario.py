"""Runnable scenario configuration: goal, per-aspect levels, agent roster,
communication protocol, resource manifest, backend, budgets, pre-run
overrides, and scheduled interventions.

A scenario file is a JSON document with sections goal, aspects, roster,
protocol, registry, backend, budgets, user_config, and interventions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

from .backend import BackendConfig, BackendKind, Matcher, Script
from .ontology import ActionKind, AgentSpec, AgentType, Goal, MemoryPolicy
from .registry import Registry, registry_from_manifest
from .taxonomy import (
    ASPECT_BY_KEY,
    ASPECT_ORDER,
    AlignmentLevel,
    AspectConfig,
    AspectId,
    AutonomyLevel,
)


class InvalidScenario(Exception):
    pass


@dataclass(frozen=True)
class Budgets:
    max_actions: int = 100
    max_protocol_cycles: int = 25
    repeat_state_limit: int = 10

    def __post_init__(self):
        for name in ("max_actions", "max_protocol_cycles", "repeat_state_limit"):
            if getattr(self, name) < 1:
                raise InvalidScenario(f"budget {name} must be >= 1")


class ProtocolName(Enum):
    STRICT_FINITE = "StrictFinite"
    DIALOGUE_CYCLE = "DialogueCycle"
    MULTI_CYCLE = "MultiCycle"


@dataclass(frozen=True)
class Stage:
    agent: str
    kind: ActionKind
    artefact: str
    receiver: Optional[str] = None


@dataclass(frozen=True)
class StrictFiniteProtocol:
    stages: Tuple[Stage, ...]
    kind: ProtocolName = ProtocolName.STRICT_FINITE


@dataclass(frozen=True)
class DialogueCycleProtocol:
    instructor: str
    executor: str
    max_cycles: int = 5
    evaluate: bool = True
    kind: ProtocolName = ProtocolName.DIALOGUE_CYCLE

    def __post_init__(self):
        if self.instructor == self.executor:
            raise InvalidScenario("dialogue instructor and executor must differ")
        if self.max_cycles < 1:
            raise InvalidScenario("max_cycles must be >= 1")


@dataclass(frozen=True)
class MultiCycleProtocol:
    creation_agent: str
    prioritization_agent: str
    execution_agent: str
    kind: ProtocolName = ProtocolName.MULTI_CYCLE


Protocol = Union[StrictFiniteProtocol, DialogueCycleProtocol, MultiCycleProtocol]


class CommandKind(Enum):
    APPROVE = "Approve"
    DENY = "Deny"
    HALT = "Halt"
    REPRIORITIZE = "Reprioritize"
    ADJUST_CONSTRAINT = "AdjustConstraint"
    INJECT_TASK = "InjectTask"


class CommandTiming(Enum):
    PRE_RUN = "PreRun"
    RUNTIME = "Runtime"


@dataclass(frozen=True)
class Command:
    kind: CommandKind
    target_aspect: AspectId
    issued_at: CommandTiming = CommandTiming.RUNTIME
    approval_id: Optional[str] = None  # Approve / Deny
    task_id: Optional[str] = None  # Reprioritize
    priority: Optional[int] = None  # Reprioritize / InjectTask
    key: Optional[str] = None  # AdjustConstraint
    value: Optional[object] = None  # AdjustConstraint
    description: Optional[str] = None  # InjectTask

    def to_dict(self) -> dict:
        out: dict = {
            "kind": self.kind.value,
            "target_aspect": self.target_aspect.value,
            "issued_at": self.issued_at.value,
        }
        for name in ("approval_id", "task_id", "priority", "key", "value", "description"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        return out


@dataclass(frozen=True)
class GateDecision:
    accepted: bool
    reason: str

    def __post_init__(self):
        if not self.accepted and not self.reason:
            raise ValueError("a rejection must carry a reason")


class JunctureKind(Enum):
    BEFORE_EXECUTE = "before_execute"  # before ExecuteTask with side effects
    BEFORE_PHASE = "before_phase"  # before each phase transition


@dataclass(frozen=True)
class ApprovalSettings:
    junctures: Tuple[JunctureKind, ...] = ()
    timeout_ms: Optional[int] = None  # auto-deny after this long; None waits


@dataclass(frozen=True)
class Intervention:
    command: Command
    at_action: Optional[int] = None  # fires at the first boundary at/after this seq
    on_approval: Optional[int] = None  # fires when the nth approval point opens

    def __post_init__(self):
        if (self.at_action is None) == (self.on_approval is None):
            raise InvalidScenario(
                "an intervention needs exactly one trigger: at_action or on_approval"
            )


@dataclass
class Scenario:
    goal: Goal
    aspect_levels: Dict[AspectId, AspectConfig]
    roster: List[AgentSpec]
    protocol: Protocol
    backend: BackendConfig
    budgets: Budgets = field(default_factory=Budgets)
    registry: Optional[Registry] = None
    aspect_params: Dict[AspectId, Dict[str, object]] = field(default_factory=dict)
    user_config: List[Command] = field(default_factory=list)
    interventions: List[Intervention] = field(default_factory=list)
    approvals: ApprovalSettings = field(default_factory=ApprovalSettings)

    def param(self, aspect: AspectId, key: str, default=None):
        return self.aspect_params.get(aspect, {}).get(key, default)

    def set_param(self, aspect: AspectId, key: str, value) -> None:
        self.aspect_params.setdefault(aspect, {})[key] = value

    def autonomy(self, aspect: AspectId) -> AutonomyLevel:
        return self.aspect_levels[aspect].autonomy

    def alignment(self, aspect: AspectId) -> AlignmentLevel:
        return self.aspect_levels[aspect].alignment


def validate_scenario(scenario: Scenario) -> None:
    for aspect in ASPECT_ORDER:
        if aspect not in scenario.aspect_levels:
            raise InvalidScenario(f"aspect levels missing {aspect.value}")
    if not scenario.roster:
        raise InvalidScenario("scenario roster is empty")
    ids = {a.id for a in scenario.roster}
    if len(ids) != len(scenario.roster):
        raise InvalidScenario("duplicate agent ids in roster")
    for agent in protocol_agents(scenario.protocol):
        if agent not in ids:
            raise InvalidScenario(f"protocol references unknown agent {agent!r}")
    for command in scenario.user_config:
        if command.issued_at is not CommandTiming.PRE_RUN:
            raise InvalidScenario("user_config entries must be PreRun commands")
        if int(scenario.alignment(command.target_aspect)) < 1:
            raise InvalidScenario(
                f"user_config override for {command.target_aspect.value} rejected: "
                f"alignment level is Integrated (L0), pre-run configuration is "
                f"not offered"
            )


def protocol_agents(protocol: Protocol) -> List[str]:
    if isinstance(protocol, StrictFiniteProtocol):
        out = []
        for stage in protocol.stages:
            out.append(stage.agent)
            if stage.receiver:
                out.append(stage.receiver)
        return out
    if isinstance(protocol, DialogueCycleProtocol):
        return [protocol.instructor, protocol.executor]
    return [
        protocol.creation_agent,
        protocol.prioritization_agent,
        protocol.execution_agent,
    ]


# --- JSON parsing -----------------------------------------------------------


def parse_scenario(document: str) -> Scenario:
    try:
        data = json.loads(document)
    except ValueError as exc:
        raise InvalidScenario(f"not a valid scenario document: {exc}")
    if not isinstance(data, dict):
        raise InvalidScenario("scenario document must be an object")
    return scenario_from_dict(data)


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def scenario_from_dict(data: dict) -> Scenario:
    try:
        scenario = _scenario_from_dict(data)
    except InvalidScenario:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScenario(f"malformed scenario: {exc}")
    validate_scenario(scenario)
    return scenario


def _aspect(key: str) -> AspectId:
    aspect = ASPECT_BY_KEY.get(str(key).lower())
    if aspect is None:
        raise InvalidScenario(f"unknown aspect key {key!r}")
    return aspect


def _scenario_from_dict(data: dict) -> Scenario:
    goal_data = data["goal"]
    goal = Goal(
        id=goal_data.get("id", "goal"),
        text=goal_data["text"],
        preferences=dict(goal_data.get("preferences", {})),
    )

    aspects: Dict[AspectId, AspectConfig] = {}
    for key, levels in data["aspects"].items():
        aspects[_aspect(key)] = AspectConfig(
            AutonomyLevel(int(levels["au"])), AlignmentLevel(int(levels["al"]))
        )

    roster = [
        AgentSpec(
            id=entry["id"],
            agent_type=AgentType(entry.get("agent_type", "TaskExecution")),
            role_text=entry.get("role_text", ""),
            memory_policy=MemoryPolicy(
                short_term_window=entry.get("memory", {}).get("short_term_window", 8),
                long_term_enabled=entry.get("memory", {}).get("long_term_enabled", False),
                summarize_on_overflow=entry.get("memory", {}).get(
                    "summarize_on_overflow", True
                ),
            ),
            tool_grants=frozenset(entry.get("tool_grants", [])),
            peers=frozenset(entry.get("peers", [])),
        )
        for entry in data["roster"]
    ]

    protocol = _protocol_from_dict(data["protocol"])
    backend = _backend_from_dict(data["backend"])
    budgets = Budgets(**data.get("budgets", {}))

    registry = None
    if "registry" in data:
        registry = registry_from_manifest(data["registry"])

    aspect_params = {
        _aspect(key): dict(params)
        for key, params in data.get("aspect_params", {}).items()
    }

    user_config = [
        _command_from_dict({**entry, "issued_at": "PreRun"})
        for entry in data.get("user_config", [])
    ]

    interventions = [
        Intervention(
            command=_command_from_dict(entry["command"]),
            at_action=entry.get("at_action"),
            on_approval=entry.get("on_approval"),
        )
        for entry in data.get("interventions", [])
    ]

    approvals_data = data.get("approvals", {})
    approvals = ApprovalSettings(
        junctures=tuple(
            JunctureKind(j) for j in approvals_data.get("junctures", [])
        ),
        timeout_ms=approvals_data.get("timeout_ms"),
    )

    return Scenario(
        goal=goal,
        aspect_levels=aspects,
        roster=roster,
        protocol=protocol,
        backend=backend,
        budgets=budgets,
        registry=registry,
        aspect_params=aspect_params,
        user_config=user_config,
        interventions=interventions,
        approvals=approvals,
    )


def _protocol_from_dict(data: dict) -> Protocol:
    kind = ProtocolName(data["kind"])
    if kind is ProtocolName.STRICT_FINITE:
        stages = tuple(
            Stage(
                agent=s["agent"],
                kind=ActionKind(s["action"]),
                artefact=s.get("artefact", f"stage-{i}"),
                receiver=s.get("receiver"),
            )
            for i, s in enumerate(data["stages"], start=1)
        )
        if not stages:
            raise InvalidScenario("StrictFinite protocol needs at least one stage")
        return StrictFiniteProtocol(stages=stages)
    if kind is ProtocolName.DIALOGUE_CYCLE:
        return DialogueCycleProtocol(
            instructor=data["instructor"],
            executor=data["executor"],
            max_cycles=data.get("max_cycles", 5),
            evaluate=data.get("evaluate", True),
        )
    return MultiCycleProtocol(
        creation_agent=data["creation"],
        prioritization_agent=data["prioritization"],
        execution_agent=data["execution"],
    )


def _backend_from_dict(data: dict) -> BackendConfig:
    kind = BackendKind(data["kind"])
    if kind is BackendKind.SCRIPTED:
        script_data = data.get("script", {})
        rules = tuple(
            (
                Matcher(
                    agent_type=(
                        AgentType(rule["match"]["agent_type"])
                        if "agent_type" in rule.get("match", {})
                        else None
                    ),
                    action_kind=(
                        ActionKind(rule["match"]["action_kind"])
                        if "action_kind" in rule.get("match", {})
                        else None
                    ),
                    step_range=(
                        tuple(rule["match"]["step_range"])
                        if "step_range" in rule.get("match", {})
                        else None
                    ),
                    prompt_substring=rule.get("match", {}).get("prompt_substring"),
                ),
                rule["response"],
            )
            for rule in script_data.get("rules", [])
        )
        return BackendConfig(
            kind=kind,
            script=Script(
                rules=rules,
                default_response=script_data.get("default_response", "ok"),
            ),
            seed=data.get("seed", 0),
        )
    return BackendConfig(
        kind=kind,
        base_url=data.get("base_url"),
        model_name=data.get("model_name"),
        auth_token_env_name=data.get("auth_token_env_name", "AAMATRIX_API_TOKEN"),
        temperature=data.get("temperature", 0.0),
        timeout_ms=data.get("timeout_ms", 30_000),
        max_retries=data.get("max_retries", 2),
    )


def _command_from_dict(data: dict) -> Command:
    return Command(
        kind=CommandKind(data["kind"]),
        target_aspect=_aspect(data["aspect"]),
        issued_at=CommandTiming(data.get("issued_at", "Runtime")),
        approval_id=data.get("approval_id"),
        task_id=data.get("task_id"),
        priority=data.get("priority"),
        key=data.get("key"),
        value=data.get("value"),
        description=data.get("description"),
    )


def command_from_dict(data: dict) -> Command:
    """Public wrapper used by the service layer."""
    try:
        return _command_from_dict(data)
    except (KeyError, ValueError) as exc:
        raise InvalidScenario(f"malformed command: {exc}")
