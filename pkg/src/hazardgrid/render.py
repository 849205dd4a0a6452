"""SVG rendering of maps, paths, and hazard evolution.

Hazard cells are shaded by the median first-contamination time across
sampled episodes: the earlier a cell typically burns, the darker its red.
Traveled path segments are drawn solid, planned-but-not-executed segments
dotted.  Output is plain SVG text with fixed number formatting, so renders
are diffable and suitable for golden-file comparison.
"""

from __future__ import annotations

import numpy as np

from .automaton import MissionAutomaton, delta
from .grid import Coord, GridMap, STAY, destination
from .planner import Policy, act

CELL_PX = 24


def first_contamination_quantile(episodes: np.ndarray, quantile: float = 0.5) -> np.ndarray:
    """(h, w) per-cell quantile of the first contamination time across
    episodes; cells that stay clean in an episode count as N+1."""
    steps = episodes.shape[1]
    first = np.argmax(episodes, axis=1).astype(np.float64)
    never = ~episodes.any(axis=1)
    first[never] = steps
    return np.quantile(first, quantile, axis=0)


def planned_path(
    policy: Policy, gmap: GridMap, aut: MissionAutomaton, horizon: int
) -> list[Coord]:
    """Nominal trajectory of a policy assuming no contamination and no slip."""
    x = gmap.start
    q = aut.initial
    path = [x]
    for t in range(min(horizon, policy.horizon)):
        if aut.is_absorbing(q):
            break
        u = act(policy, t, q, x)
        if u != STAY:
            x = destination(x, u)
        q = delta(aut, q, x, False, gmap)
        path.append(x)
    return path


def _center(cell: Coord) -> tuple[float, float]:
    return (cell[0] + 0.5) * CELL_PX, (cell[1] + 0.5) * CELL_PX


def _polyline(path: list[Coord], color: str, dashed: bool) -> str:
    if len(path) < 2:
        return ""
    points = " ".join(f"{x:.1f},{y:.1f}" for x, y in (_center(c) for c in path))
    dash = ' stroke-dasharray="5 4"' if dashed else ""
    return (
        f'<polyline points="{points}" fill="none" stroke="{color}" '
        f'stroke-width="2.5"{dash}/>'
    )


def render_svg(
    gmap: GridMap,
    solid_path: list[Coord] | None = None,
    dotted_path: list[Coord] | None = None,
    shading: np.ndarray | None = None,
    shading_horizon: int | None = None,
    path_color: str = "#1f6eb4",
) -> str:
    """Compose the map drawing: obstacles, labeled regions, hazard shading,
    and the robot path (solid = traveled, dotted = planned)."""
    w_px, h_px = gmap.width * CELL_PX, gmap.height * CELL_PX
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w_px}" height="{h_px}" '
        f'viewBox="0 0 {w_px} {h_px}">',
        f'<rect width="{w_px}" height="{h_px}" fill="#ffffff"/>',
    ]

    if shading is not None:
        steps = float(shading_horizon + 1 if shading_horizon is not None else shading.max())
        for row in range(gmap.height):
            for col in range(gmap.width):
                t_first = float(shading[row, col])
                if t_first > steps - 1.0 or gmap.occupancy[row, col]:
                    continue
                opacity = 0.25 + 0.75 * (1.0 - t_first / steps)
                parts.append(
                    f'<rect x="{col * CELL_PX}" y="{row * CELL_PX}" '
                    f'width="{CELL_PX}" height="{CELL_PX}" fill="#b22222" '
                    f'fill-opacity="{opacity:.2f}"/>'
                )

    for row in range(gmap.height):
        for col in range(gmap.width):
            if gmap.occupancy[row, col]:
                parts.append(
                    f'<rect x="{col * CELL_PX}" y="{row * CELL_PX}" '
                    f'width="{CELL_PX}" height="{CELL_PX}" fill="#333333"/>'
                )

    def cell_text(cell: Coord, text: str, color: str) -> str:
        cx, cy = _center(cell)
        return (
            f'<text x="{cx:.1f}" y="{cy + 4.5:.1f}" text-anchor="middle" '
            f'font-family="monospace" font-size="13" fill="{color}">{text}</text>'
        )

    for label in sorted(gmap.targets):
        for cell in sorted(gmap.targets[label]):
            parts.append(cell_text(cell, label, "#1a6b1a"))
    for cell in sorted(gmap.goal):
        parts.append(cell_text(cell, "F", "#7a4d00"))
    for cell in sorted(gmap.hazard_seeds):
        parts.append(cell_text(cell, "H", "#7c0a02"))

    for i in range(gmap.width + 1):
        x = i * CELL_PX
        parts.append(f'<line x1="{x}" y1="0" x2="{x}" y2="{h_px}" stroke="#cccccc"/>')
    for j in range(gmap.height + 1):
        y = j * CELL_PX
        parts.append(f'<line x1="0" y1="{y}" x2="{w_px}" y2="{y}" stroke="#cccccc"/>')

    if dotted_path:
        parts.append(_polyline(dotted_path, path_color, dashed=True))
    if solid_path:
        parts.append(_polyline(solid_path, path_color, dashed=False))

    sx, sy = _center(gmap.start)
    parts.append(f'<circle cx="{sx:.1f}" cy="{sy:.1f}" r="5.0" fill="{path_color}"/>')
    parts.append(cell_text(gmap.start, "I", "#00407a"))
    parts.append("</svg>")
    return "\n".join(p for p in parts if p) + "\n"
