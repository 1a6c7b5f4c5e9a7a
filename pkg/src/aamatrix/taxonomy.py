"""Level lattices, the 3x3 autonomy-alignment matrix, viewpoints, aspects, and
configuration counting.

Everything here is a fixed vocabulary: three autonomy levels, three alignment
levels, the nine named matrix cells, four architectural viewpoints, and the
twelve aspects partitioned among them. All values are immutable and shared
freely by the rest of the workbench.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Dict, List, Sequence, Tuple


class AutonomyLevel(IntEnum):
    """Degree to which agents decide system operation independently of fixed rules."""

    STATIC = 0
    ADAPTIVE = 1
    SELF_ORGANIZING = 2

    @property
    def label(self) -> str:
        return {0: "Static", 1: "Adaptive", 2: "SelfOrganizing"}[int(self)]


class AlignmentLevel(IntEnum):
    """Origin and timing of alignment: baked-in, pre-run configurable, or runtime."""

    INTEGRATED = 0
    USER_GUIDED = 1
    REAL_TIME_RESPONSIVE = 2

    @property
    def label(self) -> str:
        return {0: "Integrated", 1: "UserGuided", 2: "RealTimeResponsive"}[int(self)]


class CellName(Enum):
    """The nine named autonomy x alignment combinations."""

    RULE_DRIVEN_AUTOMATION = "RuleDrivenAutomation"
    USER_GUIDED_AUTOMATION = "UserGuidedAutomation"
    USER_SUPERVISED_AUTOMATION = "UserSupervisedAutomation"
    PRE_CONFIGURED_ADAPTATION = "PreConfiguredAdaptation"
    USER_GUIDED_ADAPTATION = "UserGuidedAdaptation"
    USER_COLLABORATIVE_ADAPTATION = "UserCollaborativeAdaptation"
    BOUNDED_AUTONOMY = "BoundedAutonomy"
    USER_GUIDED_AUTONOMY = "UserGuidedAutonomy"
    USER_RESPONSIVE_AUTONOMY = "UserResponsiveAutonomy"

    @property
    def cell_index(self) -> int:
        """1..9, column-major by autonomy then alignment ascending."""
        return _CELL_ORDER.index(self) + 1


# Index i-1 holds the cell for autonomy i // 3, alignment i % 3.
_CELL_ORDER: List[CellName] = [
    CellName.RULE_DRIVEN_AUTOMATION,
    CellName.USER_GUIDED_AUTOMATION,
    CellName.USER_SUPERVISED_AUTOMATION,
    CellName.PRE_CONFIGURED_ADAPTATION,
    CellName.USER_GUIDED_ADAPTATION,
    CellName.USER_COLLABORATIVE_ADAPTATION,
    CellName.BOUNDED_AUTONOMY,
    CellName.USER_GUIDED_AUTONOMY,
    CellName.USER_RESPONSIVE_AUTONOMY,
]


class Viewpoint(Enum):
    GOAL_DRIVEN_TASK_MANAGEMENT = "GoalDrivenTaskManagement"
    AGENT_COMPOSITION = "AgentComposition"
    MULTI_AGENT_COLLABORATION = "MultiAgentCollaboration"
    CONTEXT_INTERACTION = "ContextInteraction"


class AspectId(Enum):
    """The twelve classifiable architectural aspects, in canonical column order."""

    DECOM = "Decom"
    ORCH = "Orch"
    SYNTH = "Synth"
    COMMP = "CommP"
    PRENG = "PrEng"
    ACTM = "ActM"
    AGEN = "AGen"
    ROLED = "RoleD"
    MEMU = "MemU"
    NETM = "NetM"
    INTEG = "Integ"
    UTIL = "Util"

    @property
    def viewpoint(self) -> Viewpoint:
        return _ASPECT_VIEWPOINT[self]

    @property
    def key(self) -> str:
        """Lowercase short code used in file formats."""
        return self.value.lower()

    @property
    def order(self) -> int:
        """Position in the canonical column order (0-based)."""
        return ASPECT_ORDER.index(self)


ASPECT_ORDER: Tuple[AspectId, ...] = tuple(AspectId)

_ASPECT_VIEWPOINT: Dict[AspectId, Viewpoint] = {
    AspectId.DECOM: Viewpoint.GOAL_DRIVEN_TASK_MANAGEMENT,
    AspectId.ORCH: Viewpoint.GOAL_DRIVEN_TASK_MANAGEMENT,
    AspectId.SYNTH: Viewpoint.GOAL_DRIVEN_TASK_MANAGEMENT,
    AspectId.COMMP: Viewpoint.MULTI_AGENT_COLLABORATION,
    AspectId.PRENG: Viewpoint.MULTI_AGENT_COLLABORATION,
    AspectId.ACTM: Viewpoint.MULTI_AGENT_COLLABORATION,
    AspectId.AGEN: Viewpoint.AGENT_COMPOSITION,
    AspectId.ROLED: Viewpoint.AGENT_COMPOSITION,
    AspectId.MEMU: Viewpoint.AGENT_COMPOSITION,
    AspectId.NETM: Viewpoint.AGENT_COMPOSITION,
    AspectId.INTEG: Viewpoint.CONTEXT_INTERACTION,
    AspectId.UTIL: Viewpoint.CONTEXT_INTERACTION,
}

ASPECT_BY_KEY: Dict[str, AspectId] = {a.key: a for a in AspectId}


@dataclass(frozen=True)
class AspectConfig:
    """One aspect's assessed (autonomy, alignment) pair."""

    autonomy: AutonomyLevel
    alignment: AlignmentLevel

    @property
    def cell(self) -> CellName:
        return combination_name(self.autonomy, self.alignment)


@dataclass(frozen=True)
class ConfigCounts:
    total_aspects: int
    single_options_per_aspect: int
    total_single_options: int
    total_combined: int


def combination_name(au: AutonomyLevel, al: AlignmentLevel) -> CellName:
    """Name of the matrix cell for an (autonomy, alignment) pair."""
    return _CELL_ORDER[3 * int(au) + int(al)]


def cell_for_index(index: int) -> CellName:
    if not 1 <= index <= 9:
        raise ValueError(f"cell index out of range: {index}")
    return _CELL_ORDER[index - 1]


def configuration_counts(
    aspect_counts_per_viewpoint: Sequence[int], level_count: int
) -> ConfigCounts:
    """Configuration-space sizes for a viewpoint partition and level count.

    Exact integer arithmetic throughout; the combined count grows as
    (level_count^2) ** total_aspects and is unbounded.
    """
    if level_count < 1:
        raise ValueError(f"level_count must be >= 1, got {level_count}")
    if any(c < 0 for c in aspect_counts_per_viewpoint):
        raise ValueError(f"negative aspect count in {list(aspect_counts_per_viewpoint)}")
    total_aspects = sum(aspect_counts_per_viewpoint)
    single = level_count**2
    return ConfigCounts(
        total_aspects=total_aspects,
        single_options_per_aspect=single,
        total_single_options=total_aspects * single,
        total_combined=single**total_aspects,
    )


def aspect_viewpoint(aspect: AspectId) -> Viewpoint:
    """Owning viewpoint of an aspect under the fixed 3/3/4/2 partition."""
    return _ASPECT_VIEWPOINT[aspect]


def viewpoint_aspects(viewpoint: Viewpoint) -> Tuple[AspectId, ...]:
    return tuple(a for a in ASPECT_ORDER if _ASPECT_VIEWPOINT[a] is viewpoint)
