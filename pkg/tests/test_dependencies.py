from itertools import product

import pytest
from hypothesis import given
from hypothesis import strategies as st

from aamatrix.dependencies import (
    DependencyMode,
    EmptyExemplarSet,
    ExpansionPolicy,
    GoalNode,
    Severity,
    UnlabeledExemplar,
    compare,
    dependency_graph,
    detect_conflicts,
    nearest_group,
)
from aamatrix.profiles import (
    Category,
    builtin_profile,
    builtin_profiles,
    profile_from_levels,
)
from aamatrix.taxonomy import ASPECT_ORDER, AspectId, Viewpoint, viewpoint_aspects

# Independent edge construction used as the brute-force oracle: viewpoint
# pairs expanded by hand plus the three named aspect edges.
_VP = {"G": "GoalDrivenTaskManagement", "M": "MultiAgentCollaboration",
       "A": "AgentComposition", "C": "ContextInteraction"}


def oracle_edges():
    groups = {
        "G": ["Decom", "Orch", "Synth"],
        "M": ["CommP", "PrEng", "ActM"],
        "A": ["AGen", "RoleD", "MemU", "NetM"],
        "C": ["Integ", "Util"],
    }
    pairs = [("M", "G"), ("A", "G"), ("C", "G"), ("A", "M"), ("C", "M"), ("C", "A")]
    edges = set()
    for src, dst in pairs:
        for x, y in product(groups[src], groups[dst]):
            edges.add((x, y))
    edges.add(("ActM", "CommP"))
    edges.add(("Util", "Integ"))
    return edges


def oracle_conflicts(profile):
    """Exhaustive edge scan over the oracle edge set."""
    by_name = {a.value: a for a in AspectId}
    found = []
    for x, y in sorted(oracle_edges()):
        gap = int(profile.aspects[by_name[x]].autonomy) - int(
            profile.aspects[by_name[y]].autonomy
        )
        if gap > 0:
            found.append((x, y, "High" if gap == 2 else "Warning"))
    return sorted(found)


def test_requirements_graph_contains_named_edges():
    graph = dependency_graph(DependencyMode.REQUIREMENTS_DRIVEN)
    assert (AspectId.UTIL, AspectId.INTEG) in graph.edges
    assert (AspectId.ACTM, AspectId.COMMP) in graph.edges
    assert (AspectId.DECOM, GoalNode.GOAL) in graph.edges


def test_requirements_graph_matches_oracle_edge_set():
    graph = dependency_graph(DependencyMode.REQUIREMENTS_DRIVEN)
    aspect_edges = {
        (a.value, b.value)
        for a, b in graph.edges
        if not isinstance(a, GoalNode) and not isinstance(b, GoalNode)
    }
    assert aspect_edges == oracle_edges()
    assert len(graph.edges) == len(oracle_edges()) + 1  # plus Decom -> Goal


def test_availability_graph_is_exact_reversal():
    req = dependency_graph(DependencyMode.REQUIREMENTS_DRIVEN)
    avail = dependency_graph(DependencyMode.AVAILABILITY_DRIVEN)
    assert avail.edges == frozenset((b, a) for a, b in req.edges)
    assert avail.mode is DependencyMode.AVAILABILITY_DRIVEN


def test_availability_graph_goal_management_depends_on_everything():
    avail = dependency_graph(DependencyMode.AVAILABILITY_DRIVEN)
    g_aspects = viewpoint_aspects(Viewpoint.GOAL_DRIVEN_TASK_MANAGEMENT)
    c_aspects = viewpoint_aspects(Viewpoint.CONTEXT_INTERACTION)
    for g in g_aspects:
        for c in c_aspects:
            assert (g, c) in avail.edges


def test_both_graphs_are_dags():
    for mode in DependencyMode:
        graph = dependency_graph(mode)
        order = graph.topological_order()
        assert len(order) == len(graph.nodes)


def test_named_only_expansion_policy():
    graph = dependency_graph(
        DependencyMode.REQUIREMENTS_DRIVEN, expansion=ExpansionPolicy.NAMED_ONLY
    )
    assert len(graph.edges) == 3


def test_no_self_edges():
    for mode in DependencyMode:
        for a, b in dependency_graph(mode).edges:
            assert a != b


# --- conflicts ---


def intertwined_profile():
    """High-autonomy task management and utilization over static integration."""
    levels = []
    high = {AspectId.DECOM, AspectId.ACTM, AspectId.COMMP, AspectId.UTIL}
    for aspect in ASPECT_ORDER:
        levels.extend((2 if aspect in high else 0, 0))
    return profile_from_levels("intertwined", levels)


def test_detect_conflicts_flags_util_integ_dead_end_risk():
    conflicts = detect_conflicts(intertwined_profile())
    high_edges = [c.edge for c in conflicts if c.severity is Severity.HIGH]
    assert (AspectId.UTIL, AspectId.INTEG) in high_edges


def test_detect_conflicts_empty_for_uniform_profiles():
    for level in (0, 1, 2):
        profile = profile_from_levels(
            f"uniform-{level}", tuple(v for _ in ASPECT_ORDER for v in (level, 0))
        )
        assert detect_conflicts(profile) == []


def test_detect_conflicts_severity_rule():
    for conflict in detect_conflicts(intertwined_profile()):
        gap = int(conflict.dependent_autonomy) - int(conflict.dependency_autonomy)
        assert gap > 0
        assert conflict.severity is (Severity.HIGH if gap == 2 else Severity.WARNING)
        assert conflict.explanation


def test_detect_conflicts_sorted_high_first():
    conflicts = detect_conflicts(intertwined_profile())
    severities = [c.severity for c in conflicts]
    first_warning = next(
        (i for i, s in enumerate(severities) if s is Severity.WARNING), len(severities)
    )
    assert all(s is Severity.HIGH for s in severities[:first_warning])
    assert all(s is Severity.WARNING for s in severities[first_warning:])


def test_detect_conflicts_agrees_with_oracle_on_all_builtins():
    for profile in builtin_profiles():
        got = sorted(
            (c.dependent.value, c.dependency.value, c.severity.value)
            for c in detect_conflicts(profile)
        )
        assert got == oracle_conflicts(profile), profile.name


def test_autogpt_has_high_util_integ_conflict():
    conflicts = detect_conflicts(builtin_profile("Auto-GPT"))
    assert any(
        c.edge == (AspectId.UTIL, AspectId.INTEG) and c.severity is Severity.HIGH
        for c in conflicts
    )


# --- compare ---


def test_compare_identical_rows_is_zero():
    distance = compare(builtin_profile("Auto-GPT"), builtin_profile("BabyAGI"))
    assert distance.total == 0
    assert all(d == (0, 0) for d in distance.per_aspect.values())


def test_compare_self_distance_zero():
    for profile in builtin_profiles():
        assert compare(profile, profile).total == 0


def test_compare_autogpt_zapier_frozen_value():
    # Derived by independent per-cell subtraction (scripts/table_oracles.py).
    assert compare(builtin_profile("Auto-GPT"), builtin_profile("Zapier")).total == 15


def test_compare_per_aspect_breakdown_sums_to_total():
    distance = compare(builtin_profile("SuperAGI"), builtin_profile("MetaGPT"))
    assert distance.total == sum(au + al for au, al in distance.per_aspect.values())
    assert distance.total == 13


levels_strategy = st.tuples(*([st.integers(min_value=0, max_value=2)] * 24))


@given(a=levels_strategy, b=levels_strategy, c=levels_strategy)
def test_compare_is_a_metric(a, b, c):
    pa = profile_from_levels("a", a)
    pb = profile_from_levels("b", b)
    pc = profile_from_levels("c", c)
    dab = compare(pa, pb).total
    dba = compare(pb, pa).total
    assert dab >= 0
    assert dab == dba
    assert (dab == 0) == (a == b)
    assert compare(pa, pc).total <= dab + compare(pb, pc).total


# --- nearest group ---


def test_nearest_group_leave_one_out_autogpt():
    exemplars = [p for p in builtin_profiles() if p.name != "Auto-GPT"]
    result = nearest_group(builtin_profile("Auto-GPT"), exemplars)
    assert result.category is Category.GENERAL_PURPOSE
    assert result.nearest_name == "BabyAGI"
    assert result.distance == 0


def test_nearest_group_leave_one_out_superagi():
    # Frozen from the standalone nearest-neighbour oracle run.
    exemplars = [p for p in builtin_profiles() if p.name != "SuperAGI"]
    result = nearest_group(builtin_profile("SuperAGI"), exemplars)
    assert result.category is Category.GENERAL_PURPOSE
    assert result.nearest_name == "AgentGPT"
    assert result.distance == 5


def test_nearest_group_single_exemplar():
    profile = builtin_profile("CAMEL")
    result = nearest_group(profile, [builtin_profile("MetaGPT")])
    assert result.category is Category.ROLE_AGENT
    assert result.distance == 10


def test_nearest_group_rejects_empty_and_unlabeled():
    with pytest.raises(EmptyExemplarSet):
        nearest_group(builtin_profile("CAMEL"), [])
    unlabeled = profile_from_levels("u", builtin_profile("CAMEL").level_vector())
    with pytest.raises(UnlabeledExemplar):
        nearest_group(builtin_profile("CAMEL"), [unlabeled])


def test_nearest_group_permutation_invariant_without_ties():
    profile = builtin_profile("SuperAGI")
    exemplars = [p for p in builtin_profiles() if p.name != "SuperAGI"]
    forward = nearest_group(profile, exemplars)
    backward = nearest_group(profile, list(reversed(exemplars)))
    assert forward == backward


def test_nearest_group_tie_reporting():
    base = builtin_profile("Auto-GPT")
    twin_a = profile_from_levels("A-twin", base.level_vector(), Category.ROLE_AGENT)
    twin_b = profile_from_levels("B-twin", base.level_vector(), Category.GENERAL_PURPOSE)
    result = nearest_group(base, [twin_b, twin_a])
    assert result.tied
    assert result.nearest_name == "A-twin"  # lexicographic tie-break
    assert result.category is Category.ROLE_AGENT
