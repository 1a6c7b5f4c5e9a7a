#!/usr/bin/env python3
"""Render the bundled dataset: one radar chart per system, both stacked
level-distribution bar charts, and the assessment table."""

import argparse
from pathlib import Path

from aamatrix.profiles import builtin_profiles, llm_builtin_profiles
from aamatrix.reporting import (
    Dimension,
    level_distribution,
    render_bars,
    render_radar,
    render_table,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="charts", help="output directory")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    for profile in builtin_profiles():
        slug = profile.name.lower().replace("-", "_")
        (out / f"radar_{slug}.svg").write_text(render_radar(profile))
    for dimension in Dimension:
        dist = level_distribution(llm_builtin_profiles(), dimension)
        (out / f"bars_{dimension.value.lower()}.svg").write_text(render_bars(dist))
    (out / "assessment_table.md").write_text(render_table(builtin_profiles()))
    print(f"wrote {len(list(out.iterdir()))} files to {out}/")


if __name__ == "__main__":
    main()
