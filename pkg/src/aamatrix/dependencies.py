"""Aspect dependency graphs, intertwined-dependency conflict detection,
profile comparison, and nearest-exemplar grouping.

Two dependency modes mirror each other: in high-autonomy systems every
capability adapts to requirements flowing from the goal (requirements-driven,
"adapts-to" edges), while in low-autonomy systems functionality follows
whatever the fixed infrastructure makes available (availability-driven, the
exact edge reversal). A conflict is a requirements-driven edge whose dependent
aspect runs at higher autonomy than the aspect it relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

from .profiles import Category, SystemProfile
from .taxonomy import ASPECT_ORDER, AspectId, AutonomyLevel, Viewpoint, viewpoint_aspects


class GoalNode(Enum):
    """Synthetic node for the user-prompted goal; carries no levels."""

    GOAL = "Goal"


Node = Union[AspectId, GoalNode]


class DependencyMode(Enum):
    AVAILABILITY_DRIVEN = "AvailabilityDriven"
    REQUIREMENTS_DRIVEN = "RequirementsDriven"


class ExpansionPolicy(Enum):
    """How viewpoint-level edges translate to aspect-level edges."""

    ALL_PAIRS = "AllPairs"  # every aspect pair between the two viewpoints
    NAMED_ONLY = "NamedOnly"  # only the explicitly named aspect edges


class Severity(Enum):
    WARNING = "Warning"
    HIGH = "High"


class EmptyExemplarSet(Exception):
    pass


class UnlabeledExemplar(Exception):
    pass


@dataclass(frozen=True)
class DependencyGraph:
    nodes: FrozenSet[Node]
    edges: FrozenSet[Tuple[Node, Node]]
    mode: DependencyMode

    def reversed(self) -> "DependencyGraph":
        other = (
            DependencyMode.AVAILABILITY_DRIVEN
            if self.mode is DependencyMode.REQUIREMENTS_DRIVEN
            else DependencyMode.REQUIREMENTS_DRIVEN
        )
        return DependencyGraph(
            nodes=self.nodes,
            edges=frozenset((b, a) for a, b in self.edges),
            mode=other,
        )

    def topological_order(self) -> List[Node]:
        """Topological sort; raises ValueError if a cycle exists."""
        incoming: Dict[Node, int] = {n: 0 for n in self.nodes}
        for _, dst in self.edges:
            incoming[dst] += 1
        ready = sorted(
            (n for n, deg in incoming.items() if deg == 0), key=_node_sort_key
        )
        order: List[Node] = []
        while ready:
            node = ready.pop(0)
            order.append(node)
            for src, dst in sorted(self.edges, key=lambda e: _node_sort_key(e[1])):
                if src == node:
                    incoming[dst] -= 1
                    if incoming[dst] == 0:
                        ready.append(dst)
            ready.sort(key=_node_sort_key)
        if len(order) != len(self.nodes):
            raise ValueError("dependency graph contains a cycle")
        return order


def _node_sort_key(node: Node) -> Tuple[int, int]:
    if isinstance(node, GoalNode):
        return (1, 0)
    return (0, node.order)


# Viewpoint-level adapts-to edges for the requirements-driven mode.
_VIEWPOINT_EDGES: Tuple[Tuple[Viewpoint, Viewpoint], ...] = (
    (Viewpoint.MULTI_AGENT_COLLABORATION, Viewpoint.GOAL_DRIVEN_TASK_MANAGEMENT),
    (Viewpoint.AGENT_COMPOSITION, Viewpoint.GOAL_DRIVEN_TASK_MANAGEMENT),
    (Viewpoint.CONTEXT_INTERACTION, Viewpoint.GOAL_DRIVEN_TASK_MANAGEMENT),
    (Viewpoint.AGENT_COMPOSITION, Viewpoint.MULTI_AGENT_COLLABORATION),
    (Viewpoint.CONTEXT_INTERACTION, Viewpoint.MULTI_AGENT_COLLABORATION),
    (Viewpoint.CONTEXT_INTERACTION, Viewpoint.AGENT_COMPOSITION),
)

# Aspect-level adapts-to edges stated by name.
_NAMED_EDGES: Tuple[Tuple[Node, Node], ...] = (
    (AspectId.DECOM, GoalNode.GOAL),
    (AspectId.ACTM, AspectId.COMMP),
    (AspectId.UTIL, AspectId.INTEG),
)


def dependency_graph(
    mode: DependencyMode,
    expansion: ExpansionPolicy = ExpansionPolicy.ALL_PAIRS,
) -> DependencyGraph:
    """The aspect dependency graph for one mode.

    The requirements-driven graph carries the adapts-to edges; the
    availability-driven graph is its exact reversal.
    """
    edges: set = set(_NAMED_EDGES)
    if expansion is ExpansionPolicy.ALL_PAIRS:
        for src_vp, dst_vp in _VIEWPOINT_EDGES:
            for src in viewpoint_aspects(src_vp):
                for dst in viewpoint_aspects(dst_vp):
                    edges.add((src, dst))
    nodes: FrozenSet[Node] = frozenset(ASPECT_ORDER) | {GoalNode.GOAL}
    graph = DependencyGraph(
        nodes=nodes, edges=frozenset(edges), mode=DependencyMode.REQUIREMENTS_DRIVEN
    )
    if mode is DependencyMode.AVAILABILITY_DRIVEN:
        return graph.reversed()
    return graph


@dataclass(frozen=True)
class Conflict:
    """A requirements-driven edge whose dependent outranks its dependency in autonomy."""

    dependent: AspectId
    dependency: AspectId
    dependent_autonomy: AutonomyLevel
    dependency_autonomy: AutonomyLevel
    severity: Severity
    explanation: str

    @property
    def edge(self) -> Tuple[AspectId, AspectId]:
        return (self.dependent, self.dependency)

    def to_dict(self) -> dict:
        return {
            "dependent": self.dependent.value,
            "dependency": self.dependency.value,
            "dependent_autonomy": int(self.dependent_autonomy),
            "dependency_autonomy": int(self.dependency_autonomy),
            "severity": self.severity.value,
            "explanation": self.explanation,
        }


def detect_conflicts(
    profile: SystemProfile,
    graph: Optional[DependencyGraph] = None,
) -> List[Conflict]:
    """Scan the requirements-driven edges for autonomy-level discrepancies.

    Severity is High when the ordinal gap is 2 (a self-organizing aspect
    presuming flexibility from a static one), Warning when it is 1.
    """
    if graph is None:
        graph = dependency_graph(DependencyMode.REQUIREMENTS_DRIVEN)
    if graph.mode is not DependencyMode.REQUIREMENTS_DRIVEN:
        raise ValueError("conflict detection is defined on the requirements-driven graph")
    conflicts: List[Conflict] = []
    for src, dst in graph.edges:
        if isinstance(src, GoalNode) or isinstance(dst, GoalNode):
            continue
        src_au = profile.aspects[src].autonomy
        dst_au = profile.aspects[dst].autonomy
        gap = int(src_au) - int(dst_au)
        if gap <= 0:
            continue
        severity = Severity.HIGH if gap == 2 else Severity.WARNING
        conflicts.append(
            Conflict(
                dependent=src,
                dependency=dst,
                dependent_autonomy=src_au,
                dependency_autonomy=dst_au,
                severity=severity,
                explanation=(
                    f"{src.value} at {src_au.label} autonomy adapts to "
                    f"{dst.value} held at {dst_au.label} autonomy; the gap of "
                    f"{gap} risks an operational dead end"
                ),
            )
        )
    conflicts.sort(
        key=lambda c: (
            0 if c.severity is Severity.HIGH else 1,
            c.dependent.order,
            c.dependency.order,
        )
    )
    return conflicts


@dataclass(frozen=True)
class ProfileDistance:
    total: int
    per_aspect: Dict[AspectId, Tuple[int, int]]


def compare(a: SystemProfile, b: SystemProfile) -> ProfileDistance:
    """L1 distance over the 24 level ordinals with a per-aspect breakdown."""
    per_aspect: Dict[AspectId, Tuple[int, int]] = {}
    total = 0
    for aspect in ASPECT_ORDER:
        ca, cb = a.aspects[aspect], b.aspects[aspect]
        au_diff = abs(int(ca.autonomy) - int(cb.autonomy))
        al_diff = abs(int(ca.alignment) - int(cb.alignment))
        per_aspect[aspect] = (au_diff, al_diff)
        total += au_diff + al_diff
    return ProfileDistance(total=total, per_aspect=per_aspect)


@dataclass(frozen=True)
class NearestGroupResult:
    category: Category
    distance: int
    nearest_name: str
    tied: bool


def nearest_group(
    profile: SystemProfile, exemplars: Sequence[SystemProfile]
) -> NearestGroupResult:
    """Category of the closest labeled exemplar; name order breaks ties."""
    if not exemplars:
        raise EmptyExemplarSet("nearest_group needs at least one exemplar")
    for exemplar in exemplars:
        if exemplar.category is Category.UNLABELED:
            raise UnlabeledExemplar(f"exemplar {exemplar.name!r} has no category")
    scored = sorted(
        ((compare(profile, e).total, e.name, e) for e in exemplars),
        key=lambda t: (t[0], t[1]),
    )
    best_distance, best_name, best = scored[0]
    tied = len(scored) > 1 and scored[1][0] == best_distance
    return NearestGroupResult(
        category=best.category,
        distance=best_distance,
        nearest_name=best_name,
        tied=tied,
    )
