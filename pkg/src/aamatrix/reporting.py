"""Charts and tables over system profiles: radar charts, stacked level-
distribution bars, the 24-column assessment table, and distribution stats.

All renderers are pure and byte-deterministic: fixed axis order, fixed style
constants, fixed float formatting, no timestamps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Sequence, Tuple

from .profiles import SystemProfile
from .taxonomy import ASPECT_ORDER, AspectId

# Style constants, kept in one place for golden-file stability.
RADAR_SIZE = 420
RADAR_MARGIN = 56
AUTONOMY_COLOR = "#1f77b4"  # solid blue polygon
ALIGNMENT_COLOR = "#2ca02c"  # dashed green polygon
RING_COLOR = "#bbbbbb"
AXIS_COLOR = "#888888"
TEXT_COLOR = "#333333"
BAR_COLORS = {0: "#c6dbef", 1: "#6baed6", 2: "#2171b5"}  # L0, L1, L2 segments


class Dimension(Enum):
    AUTONOMY = "Autonomy"
    ALIGNMENT = "Alignment"


@dataclass(frozen=True)
class LevelDistribution:
    dimension: Dimension
    per_aspect: Dict[AspectId, Dict[int, int]]
    population: int

    def __post_init__(self):
        for aspect, counts in self.per_aspect.items():
            if counts.get(0, 0) + counts.get(1, 0) + counts.get(2, 0) != self.population:
                raise ValueError(
                    f"{aspect.value}: level counts do not sum to the population"
                )


def level_distribution(
    profiles: Sequence[SystemProfile], dimension: Dimension
) -> LevelDistribution:
    """Exact per-aspect counts of each level across the given profiles."""
    per_aspect: Dict[AspectId, Dict[int, int]] = {
        aspect: {0: 0, 1: 0, 2: 0} for aspect in ASPECT_ORDER
    }
    for profile in profiles:
        for aspect in ASPECT_ORDER:
            config = profile.aspects[aspect]
            level = (
                int(config.autonomy)
                if dimension is Dimension.AUTONOMY
                else int(config.alignment)
            )
            per_aspect[aspect][level] += 1
    return LevelDistribution(
        dimension=dimension, per_aspect=per_aspect, population=len(profiles)
    )


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _radar_point(center: float, radius: float, index: int) -> Tuple[float, float]:
    # Axis 0 points straight up; the rest follow clockwise.
    angle = -math.pi / 2 + 2 * math.pi * index / 12
    return center + radius * math.cos(angle), center + radius * math.sin(angle)


def radar_vertex_radii(profile: SystemProfile) -> Dict[str, Tuple[int, int]]:
    """Level ordinals per axis, exposed for chart verification."""
    return {
        aspect.value: (
            int(profile.aspects[aspect].autonomy),
            int(profile.aspects[aspect].alignment),
        )
        for aspect in ASPECT_ORDER
    }


def render_radar(profile: SystemProfile) -> str:
    """Radar chart with twelve fixed axes, three rings, and two polygons:
    solid for autonomy, dashed for alignment. Level 0 sits at the center."""
    center = RADAR_SIZE / 2
    outer = center - RADAR_MARGIN
    parts: List[str] = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{RADAR_SIZE}" '
        f'height="{RADAR_SIZE}" viewBox="0 0 {RADAR_SIZE} {RADAR_SIZE}">',
        f'<rect width="{RADAR_SIZE}" height="{RADAR_SIZE}" fill="#ffffff"/>',
        f'<title>{_escape(profile.name)}</title>',
    ]
    for level in (0, 1, 2):
        radius = outer * level / 2
        parts.append(
            f'<circle cx="{_fmt(center)}" cy="{_fmt(center)}" r="{_fmt(radius)}" '
            f'fill="none" stroke="{RING_COLOR}" stroke-width="1"/>'
        )
    for index, aspect in enumerate(ASPECT_ORDER):
        x, y = _radar_point(center, outer, index)
        parts.append(
            f'<line x1="{_fmt(center)}" y1="{_fmt(center)}" x2="{_fmt(x)}" '
            f'y2="{_fmt(y)}" stroke="{AXIS_COLOR}" stroke-width="0.5"/>'
        )
        lx, ly = _radar_point(center, outer + 18, index)
        parts.append(
            f'<text x="{_fmt(lx)}" y="{_fmt(ly)}" font-size="12" '
            f'fill="{TEXT_COLOR}" text-anchor="middle" '
            f'dominant-baseline="middle" font-family="sans-serif">{aspect.value}</text>'
        )
    for selector, color, dash in (
        (lambda c: int(c.autonomy), AUTONOMY_COLOR, ""),
        (lambda c: int(c.alignment), ALIGNMENT_COLOR, ' stroke-dasharray="6,4"'),
    ):
        points = []
        for index, aspect in enumerate(ASPECT_ORDER):
            level = selector(profile.aspects[aspect])
            x, y = _radar_point(center, outer * level / 2, index)
            points.append(f"{_fmt(x)},{_fmt(y)}")
        parts.append(
            f'<polygon points="{" ".join(points)}" fill="{color}" '
            f'fill-opacity="0.15" stroke="{color}" stroke-width="2"{dash}/>'
        )
    parts.append(
        f'<text x="{_fmt(center)}" y="{_fmt(RADAR_SIZE - 12)}" font-size="14" '
        f'fill="{TEXT_COLOR}" text-anchor="middle" '
        f'font-family="sans-serif">{_escape(profile.name)} '
        f"(solid: autonomy, dashed: alignment)</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_bars(distribution: LevelDistribution) -> str:
    """Twelve stacked bars with a data table below the chart."""
    bar_width = 40
    gap = 18
    chart_height = 220
    left = 60
    top = 30
    table_top = top + chart_height + 40
    width = left + 12 * (bar_width + gap) + 20
    height = table_top + 5 * 20 + 20
    population = distribution.population
    parts: List[str] = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{left}" y="20" font-size="14" fill="{TEXT_COLOR}" '
        f'font-family="sans-serif">{distribution.dimension.value} level distribution '
        f"(population {population})</text>",
    ]
    for index, aspect in enumerate(ASPECT_ORDER):
        x = left + index * (bar_width + gap)
        counts = distribution.per_aspect[aspect]
        y = top + chart_height
        for level in (0, 1, 2):
            count = counts.get(level, 0)
            if population == 0 or count == 0:
                continue
            segment = chart_height * count / population
            y -= segment
            parts.append(
                f'<rect x="{x}" y="{_fmt(y)}" width="{bar_width}" '
                f'height="{_fmt(segment)}" fill="{BAR_COLORS[level]}" '
                f'stroke="#ffffff" stroke-width="0.5"/>'
            )
        parts.append(
            f'<text x="{x + bar_width / 2:.1f}" y="{top + chart_height + 16}" '
            f'font-size="11" fill="{TEXT_COLOR}" text-anchor="middle" '
            f'font-family="sans-serif">{aspect.value}</text>'
        )
    # Data table below the chart.
    rows = [("L0", 0), ("L1", 1), ("L2", 2)]
    parts.append(
        f'<text x="{left - 50}" y="{table_top}" font-size="11" fill="{TEXT_COLOR}" '
        f'font-family="sans-serif">counts</text>'
    )
    for row_index, (label, level) in enumerate(rows):
        y = table_top + 20 * (row_index + 1)
        parts.append(
            f'<text x="{left - 50}" y="{y}" font-size="11" fill="{TEXT_COLOR}" '
            f'font-family="sans-serif">{label}</text>'
        )
        for index, aspect in enumerate(ASPECT_ORDER):
            x = left + index * (bar_width + gap) + bar_width / 2
            count = distribution.per_aspect[aspect].get(level, 0)
            parts.append(
                f'<text x="{x:.1f}" y="{y}" font-size="11" fill="{TEXT_COLOR}" '
                f'text-anchor="middle" font-family="sans-serif">{count}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_table(profiles: Sequence[SystemProfile]) -> str:
    """Markdown table: one row per profile, AU and AL columns per aspect in
    canonical order, grouped by viewpoint in the header comment row."""
    header_cells = ["System"]
    for aspect in ASPECT_ORDER:
        header_cells.append(f"{aspect.value} AU")
        header_cells.append(f"{aspect.value} AL")
    lines = [
        "| " + " | ".join(header_cells) + " |",
        "|" + "---|" * len(header_cells),
    ]
    for profile in profiles:
        cells = [profile.name]
        for aspect in ASPECT_ORDER:
            config = profile.aspects[aspect]
            cells.append(str(int(config.autonomy)))
            cells.append(str(int(config.alignment)))
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def parse_table(markdown: str) -> List[Tuple[str, Tuple[int, ...]]]:
    """Inverse of render_table, used to verify round trips."""
    rows: List[Tuple[str, Tuple[int, ...]]] = []
    for line in markdown.splitlines()[2:]:
        cells = [c.strip() for c in line.strip().strip("|").split("|")]
        if len(cells) != 25:
            continue
        rows.append((cells[0], tuple(int(c) for c in cells[1:])))
    return rows


def distribution_to_dict(distribution: LevelDistribution) -> dict:
    return {
        "dimension": distribution.dimension.value,
        "population": distribution.population,
        "per_aspect": {
            aspect.key: {
                "L0": distribution.per_aspect[aspect].get(0, 0),
                "L1": distribution.per_aspect[aspect].get(1, 0),
                "L2": distribution.per_aspect[aspect].get(2, 0),
            }
            for aspect in ASPECT_ORDER
        },
    }


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )
