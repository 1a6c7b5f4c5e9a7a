"""Runtime domain types for a task-management activity: goals, tasks, agents,
actions, memories, artefacts, and the activity itself.

An activity moves through Decomposition, Orchestration, and Synthesis before
reaching a terminal outcome. Its action log is append-only with strictly
increasing sequence numbers; observers receive immutable snapshots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple, Union



class Phase(Enum):
    DECOMPOSITION = "Decomposition"
    ORCHESTRATION = "Orchestration"
    SYNTHESIS = "Synthesis"
    TERMINAL = "Terminal"


class ActionKind(Enum):
    DECOMPOSE_TASK = "DecomposeTask"
    CREATE_TASK = "CreateTask"
    DELEGATE_TASK = "DelegateTask"
    EXECUTE_TASK = "ExecuteTask"
    EVALUATE_RESULT = "EvaluateResult"
    MERGE_RESULT = "MergeResult"


class TaskStatus(Enum):
    PENDING = "Pending"
    ASSIGNED = "Assigned"
    RUNNING = "Running"
    DONE = "Done"
    FAILED = "Failed"


class AgentType(Enum):
    TASK_CREATION = "TaskCreation"
    TASK_PRIORITIZATION = "TaskPrioritization"
    TASK_EXECUTION = "TaskExecution"
    DOMAIN_ROLE = "DomainRole"
    TECHNICAL = "Technical"


class OutcomeStatus(Enum):
    COMPLETED = "Completed"
    HALTED = "Halted"
    NON_TERMINATION = "NonTermination"
    DEAD_END = "DeadEnd"
    ERROR = "Error"


class ArtefactKind(Enum):
    TEXT = "Text"
    CODE = "Code"
    BINARY = "Binary"
    REFERENCE = "Reference"


class Verdict(Enum):
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"


# Which action kinds belong to which phase. EvaluateResult occurs both while
# tasks run and while results are merged.
PHASE_ACTIONS: Dict[Phase, Set[ActionKind]] = {
    Phase.DECOMPOSITION: {ActionKind.DECOMPOSE_TASK, ActionKind.CREATE_TASK},
    Phase.ORCHESTRATION: {
        ActionKind.DELEGATE_TASK,
        ActionKind.EXECUTE_TASK,
        ActionKind.EVALUATE_RESULT,
    },
    Phase.SYNTHESIS: {ActionKind.MERGE_RESULT, ActionKind.EVALUATE_RESULT},
}


class OntologyError(Exception):
    pass


class EmptyRoster(OntologyError):
    pass


class PhaseMismatch(OntologyError):
    pass


class CyclicTaskDependency(OntologyError):
    pass


@dataclass(frozen=True)
class Goal:
    id: str
    text: str
    preferences: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.text:
            raise ValueError("goal text must be nonempty")


@dataclass(frozen=True)
class Artefact:
    kind: ArtefactKind
    name: str
    payload: Union[str, bytes]
    produced_by: str  # action id

    def __post_init__(self):
        if not self.name:
            raise ValueError("artefact name must be nonempty")


@dataclass(frozen=True)
class Evaluation:
    verdict: Verdict
    rationale: str


@dataclass(frozen=True)
class TaskResult:
    task: str
    payload: str
    artefacts: Tuple[Artefact, ...] = ()
    evaluation: Optional[Evaluation] = None


@dataclass
class Task:
    id: str
    description: str
    priority: int = 0
    parent: Optional[str] = None
    depends_on: Set[str] = field(default_factory=set)
    status: TaskStatus = TaskStatus.PENDING
    assignee: Optional[str] = None
    result: Optional[TaskResult] = None
    tags: Set[str] = field(default_factory=set)  # required capability tags

    def __post_init__(self):
        if self.priority < 0:
            raise ValueError("task priority must be >= 0")
        if self.id in self.depends_on:
            raise CyclicTaskDependency(f"task {self.id} depends on itself")


@dataclass(frozen=True)
class MemoryPolicy:
    short_term_window: int = 8
    long_term_enabled: bool = False
    summarize_on_overflow: bool = True

    def __post_init__(self):
        if self.short_term_window < 0:
            raise ValueError("short_term_window must be >= 0")


@dataclass
class AgentMemory:
    short_term: List[str] = field(default_factory=list)
    long_term: Dict[str, str] = field(default_factory=dict)
    notices: List[str] = field(default_factory=list)


@dataclass(frozen=True)
class AgentSpec:
    id: str
    agent_type: AgentType
    role_text: str = ""
    memory_policy: MemoryPolicy = field(default_factory=MemoryPolicy)
    tool_grants: frozenset = frozenset()
    peers: frozenset = frozenset()

    def __post_init__(self):
        if self.agent_type is AgentType.DOMAIN_ROLE and not self.role_text:
            raise ValueError(f"domain role agent {self.id} needs a role_text")
        if self.id in self.peers:
            raise ValueError(f"agent {self.id} lists itself as a peer")


@dataclass(frozen=True)
class PromptSnapshot:
    """Prompt content attached to an action for the log."""

    base: str
    augmented: str
    response: Optional[str] = None


@dataclass(frozen=True)
class Action:
    id: str
    kind: ActionKind
    actor: str
    phase: Phase
    seq: int = 0
    receiver: Optional[str] = None
    task: Optional[str] = None
    prompt_record: Optional[PromptSnapshot] = None
    parent_action: Optional[str] = None

    def __post_init__(self):
        if self.kind is ActionKind.DELEGATE_TASK and not self.receiver:
            raise ValueError("DelegateTask requires a receiver")


@dataclass(frozen=True)
class ActivityOutcome:
    status: OutcomeStatus
    detail: str = ""
    total_result: Optional[str] = None
    response: Optional[str] = None

    def __post_init__(self):
        if self.status is OutcomeStatus.COMPLETED and (
            self.total_result is None or self.response is None
        ):
            raise ValueError("a completed outcome carries total_result and response")


@dataclass
class Activity:
    id: str
    goal: Goal
    agents: Dict[str, AgentSpec]
    memories: Dict[str, AgentMemory]
    phase: Phase = Phase.DECOMPOSITION
    tasks: Dict[str, Task] = field(default_factory=dict)
    action_log: List[Action] = field(default_factory=list)
    activity_memory: Dict[str, str] = field(default_factory=dict)
    outcome: Optional[ActivityOutcome] = None
    allow_midrun_task_creation: bool = False

    def pending_tasks(self) -> List[Task]:
        return [t for t in self.tasks.values() if t.status is TaskStatus.PENDING]

    def snapshot_log(self) -> Tuple[Action, ...]:
        """Immutable copy of the action log for observers."""
        return tuple(self.action_log)

    def agent_actions(self, agent_id: str) -> Tuple[Action, ...]:
        """Per-agent view derived by filtering the canonical log on actor."""
        return tuple(a for a in self.action_log if a.actor == agent_id)


_PHASE_SEQUENCE = (Phase.DECOMPOSITION, Phase.ORCHESTRATION, Phase.SYNTHESIS, Phase.TERMINAL)


def new_activity(
    goal: Goal,
    roster: Sequence[AgentSpec],
    activity_id: str = "activity",
    allow_midrun_task_creation: bool = False,
) -> Activity:
    """Fresh activity in the Decomposition phase with an empty log."""
    if not roster:
        raise EmptyRoster("an activity needs at least one agent")
    agents = {spec.id: spec for spec in roster}
    if len(agents) != len(roster):
        raise ValueError("duplicate agent ids in roster")
    return Activity(
        id=activity_id,
        goal=goal,
        agents=agents,
        memories={spec.id: AgentMemory() for spec in roster},
        allow_midrun_task_creation=allow_midrun_task_creation,
    )


def advance_phase(activity: Activity, to: Phase) -> None:
    """Move to the next phase; only forward transitions are permitted."""
    current = _PHASE_SEQUENCE.index(activity.phase)
    target = _PHASE_SEQUENCE.index(to)
    if target != current + 1:
        raise PhaseMismatch(f"cannot move from {activity.phase.value} to {to.value}")
    activity.phase = to


def allowed_kinds(activity: Activity, phase: Phase) -> Set[ActionKind]:
    kinds = set(PHASE_ACTIONS.get(phase, set()))
    if phase is Phase.ORCHESTRATION and activity.allow_midrun_task_creation:
        kinds.add(ActionKind.CREATE_TASK)
    return kinds


def append_action(activity: Activity, action: Action) -> Activity:
    """Append one action to the log. The action's phase must match the
    activity's current phase and its kind must belong to that phase."""
    if action.phase is not activity.phase:
        raise PhaseMismatch(
            f"action {action.kind.value} is tagged {action.phase.value} but the "
            f"activity is in {activity.phase.value}"
        )
    if action.kind not in allowed_kinds(activity, activity.phase):
        raise PhaseMismatch(
            f"{action.kind.value} is not permitted during {activity.phase.value}"
        )
    stamped = replace(action, seq=len(activity.action_log) + 1)
    activity.action_log.append(stamped)
    return activity


def add_task(activity: Activity, task: Task) -> None:
    """Insert a task, keeping the dependency relation acyclic."""
    if task.id in activity.tasks:
        raise ValueError(f"duplicate task id {task.id}")
    for dep in task.depends_on:
        if dep != task.id and dep not in activity.tasks:
            raise ValueError(f"task {task.id} depends on unknown task {dep}")
    activity.tasks[task.id] = task
    try:
        check_task_acyclicity(activity.tasks)
    except CyclicTaskDependency:
        del activity.tasks[task.id]
        raise


def check_task_acyclicity(tasks: Dict[str, Task]) -> None:
    visited: Set[str] = set()
    stack: Set[str] = set()

    def visit(task_id: str) -> None:
        visited.add(task_id)
        stack.add(task_id)
        for dep in tasks[task_id].depends_on:
            if dep not in tasks:
                continue
            if dep in stack:
                raise CyclicTaskDependency(f"dependency cycle through {dep}")
            if dep not in visited:
                visit(dep)
        stack.discard(task_id)

    for tid in tasks:
        if tid not in visited:
            visit(tid)


def truncation_summary(entries: Sequence[str]) -> str:
    """Deterministic fallback summariser: first 120 characters, marked."""
    return " ".join(entries)[:120] + "..."


def memory_record(
    memory: AgentMemory,
    policy: MemoryPolicy,
    entry: str,
    summarize: Optional[Callable[[Sequence[str]], str]] = None,
) -> AgentMemory:
    """Append an entry to short-term memory, compressing on overflow.

    When the buffer exceeds the window and the policy allows summarising, the
    oldest half (rounded up) of the overflowed buffer collapses into a single
    summary entry; otherwise the oldest entries are dropped. A zero window
    retains nothing.
    """
    if policy.short_term_window == 0:
        return memory
    memory.short_term.append(entry)
    if len(memory.short_term) <= policy.short_term_window:
        return memory
    if policy.summarize_on_overflow:
        keep_from = math.ceil(len(memory.short_term) / 2)
        head, tail = memory.short_term[:keep_from], memory.short_term[keep_from:]
        summary = (summarize or truncation_summary)(head)
        memory.short_term = [summary, *tail]
    else:
        overflow = len(memory.short_term) - policy.short_term_window
        memory.short_term = memory.short_term[overflow:]
    return memory


def memory_store(memory: AgentMemory, policy: MemoryPolicy, key: str, value: str) -> bool:
    """Write to long-term memory; a disabled policy makes this a recorded no-op."""
    if not policy.long_term_enabled:
        memory.notices.append(f"long-term write of {key!r} skipped: store disabled")
        return False
    memory.long_term[key] = value
    return True
