#!/usr/bin/env python3
"""Independent oracles for the bundled assessment dataset.

Standalone on purpose: transcribes the assessment grid and the dependency
edge list by hand and derives expected values (level distributions,
conflict scans, pairwise distances, leave-one-out nearest neighbours)
without importing the package. Run before trusting any frozen test value.
"""

from itertools import product

ASPECTS = ["Decom", "Orch", "Synth", "CommP", "PrEng", "ActM",
           "AGen", "RoleD", "MemU", "NetM", "Integ", "Util"]

# (name, [au, al] x 12 in ASPECTS order)
ROWS = {
    "Auto-GPT":   [2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 2, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 2, 0],
    "BabyAGI":    [2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 2, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 2, 0],
    "SuperAGI":   [2, 0, 1, 0, 1, 1, 0, 0, 1, 0, 2, 0, 1, 1, 2, 1, 0, 1, 0, 0, 0, 1, 2, 1],
    "HuggingGPT": [2, 0, 1, 0, 2, 0, 0, 0, 2, 0, 2, 0, 2, 0, 2, 0, 1, 0, 0, 0, 2, 0, 2, 0],
    "MetaGPT":    [2, 0, 0, 0, 2, 0, 1, 0, 1, 0, 2, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 2, 0],
    "CAMEL":      [2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 0, 0, 1, 1, 1, 0, 0, 0, 1, 0, 0, 0, 0],
    "AgentGPT":   [2, 1, 1, 0, 1, 0, 0, 0, 1, 0, 2, 0, 1, 1, 2, 0, 0, 0, 0, 0, 0, 0, 2, 1],
    "Zapier":     [1, 1, 0, 1, 0, 1, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 1],
}

CATEGORY = {
    "Auto-GPT": "GeneralPurpose", "BabyAGI": "GeneralPurpose",
    "SuperAGI": "GeneralPurpose", "AgentGPT": "GeneralPurpose",
    "HuggingGPT": "CentralController", "MetaGPT": "RoleAgent",
    "CAMEL": "RoleAgent", "Zapier": "WorkflowAutomation",
}

VIEWPOINT = {"Decom": "G", "Orch": "G", "Synth": "G",
             "CommP": "M", "PrEng": "M", "ActM": "M",
             "AGen": "A", "RoleD": "A", "MemU": "A", "NetM": "A",
             "Integ": "C", "Util": "C"}


def requirements_edges():
    """Adapts-to edges: viewpoint pairs expanded to aspects, plus named ones."""
    vp_edges = [("M", "G"), ("A", "G"), ("C", "G"), ("A", "M"), ("C", "M"), ("C", "A")]
    edges = set()
    for src_vp, dst_vp in vp_edges:
        for x, y in product(ASPECTS, ASPECTS):
            if VIEWPOINT[x] == src_vp and VIEWPOINT[y] == dst_vp:
                edges.add((x, y))
    edges.add(("ActM", "CommP"))
    edges.add(("Util", "Integ"))
    # Decom -> Goal carries no levels; irrelevant for conflict scans.
    return sorted(edges)


def au(row, aspect):
    return row[2 * ASPECTS.index(aspect)]


def al(row, aspect):
    return row[2 * ASPECTS.index(aspect) + 1]


def conflicts(row):
    found = []
    for x, y in requirements_edges():
        gap = au(row, x) - au(row, y)
        if gap > 0:
            found.append((x, y, "High" if gap == 2 else "Warning"))
    return found


def distance(a, b):
    return sum(abs(x - y) for x, y in zip(a, b))


def main():
    llm_rows = [n for n in ROWS if n != "Zapier"]
    print("== requirements-driven edge count:", len(requirements_edges()))

    print("\n== autonomy level distribution over", len(llm_rows), "LLM systems ==")
    for aspect in ASPECTS:
        counts = {0: 0, 1: 0, 2: 0}
        for name in llm_rows:
            counts[au(ROWS[name], aspect)] += 1
        print(f"  {aspect:6s} {counts}")

    print("\n== conflict scan per system ==")
    for name, row in ROWS.items():
        found = conflicts(row)
        high = [(x, y) for x, y, s in found if s == "High"]
        print(f"  {name:10s} total={len(found):2d} high={len(high):2d} "
              f"util->integ high={'yes' if ('Util', 'Integ') in high else 'no'}")

    print("\n== pairwise distances ==")
    names = list(ROWS)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            print(f"  {a:10s} <-> {b:10s} = {distance(ROWS[a], ROWS[b])}")

    print("\n== leave-one-out nearest neighbour ==")
    for name in ROWS:
        best = min(((distance(ROWS[name], ROWS[o]), o) for o in ROWS if o != name),
                   key=lambda t: (t[0], t[1]))
        print(f"  {name:10s} -> {best[1]:10s} d={best[0]} category={CATEGORY[best[1]]}")

    print("\n== counting formulas ==")
    t_a = 3 + 3 + 4 + 2
    s_c = 3 ** 2
    print(f"  T_A={t_a} S_C={s_c} T_SC={t_a * s_c} T_CC={s_c ** t_a}")


if __name__ == "__main__":
    main()
