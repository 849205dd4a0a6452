"""Grid geometry, occupancy maps, and the robot motion kernel.

Coordinates are ``(col, row)`` pairs with the origin at the top-left
corner of the text map.  Numpy arrays covering the grid are indexed
``[row, col]`` and have shape ``(height, width)``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InputError

Coord = tuple[int, int]

# Canonical control order; ties in the planner are broken in this order.
CONTROLS: tuple[str, ...] = ("N", "S", "E", "W", "0")
STAY = "0"
STAY_INDEX = CONTROLS.index(STAY)
CONTROL_OFFSETS: dict[str, tuple[int, int]] = {
    "N": (0, -1),
    "S": (0, 1),
    "E": (1, 0),
    "W": (-1, 0),
    "0": (0, 0),
}
OFFSETS: tuple[tuple[int, int], ...] = tuple(CONTROL_OFFSETS[u] for u in CONTROLS)

OBSTACLE_CHAR = "#"
FREE_CHAR = "."
START_CHAR = "I"
GOAL_CHAR = "F"
HAZARD_CHAR = "H"
TARGET_CHARS = "ABCDE"
GOAL_LABEL = "F"


def manhattan(a: Coord, b: Coord) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


@dataclass
class GridMap:
    """Static occupancy map with annotated start/target/goal/hazard cells.

    Immutable after construction; safe to share between workers.
    """

    width: int
    height: int
    occupancy: np.ndarray  # (height, width) bool, True = obstacle
    start: Coord
    targets: dict[str, frozenset[Coord]] = field(default_factory=dict)
    goal: frozenset[Coord] = frozenset()
    hazard_seeds: frozenset[Coord] = frozenset()

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise InputError("grid dimensions must be at least 1x1")
        self.occupancy = np.asarray(self.occupancy, dtype=bool)
        if self.occupancy.shape != (self.height, self.width):
            raise InputError(
                f"occupancy shape {self.occupancy.shape} does not match "
                f"(height={self.height}, width={self.width})"
            )
        for role, cells in self._annotations():
            for cell in cells:
                if not self.in_bounds(cell):
                    raise InputError(f"{role} cell {cell} is out of bounds")
                if not self.is_free(cell):
                    raise InputError(f"{role} cell {cell} lies on an obstacle")

    def _annotations(self):
        yield "start", (self.start,)
        for label, cells in self.targets.items():
            yield f"target {label}", cells
        yield "goal", self.goal
        yield "hazard seed", self.hazard_seeds

    def in_bounds(self, cell: Coord) -> bool:
        col, row = cell
        return 0 <= col < self.width and 0 <= row < self.height

    def is_free(self, cell: Coord) -> bool:
        col, row = cell
        return self.in_bounds(cell) and not self.occupancy[row, col]

    @cached_property
    def free_mask(self) -> np.ndarray:
        """(height, width) bool, True where the cell is free space."""
        return ~self.occupancy

    def free_cells(self) -> list[Coord]:
        """All free cells in row-major order."""
        rows, cols = np.nonzero(self.free_mask)
        return [(int(c), int(r)) for r, c in zip(rows, cols)]

    @cached_property
    def _label_by_cell(self) -> dict[Coord, str]:
        # Precedence when annotations overlap: goal beats targets,
        # targets resolve lexicographically.
        out: dict[Coord, str] = {}
        for label in sorted(self.targets, reverse=True):
            for cell in self.targets[label]:
                out[cell] = label
        for cell in self.goal:
            out[cell] = GOAL_LABEL
        return out

    def effective_label(self, cell: Coord) -> str:
        """Region label of a cell under the documented precedence, '' if plain."""
        return self._label_by_cell.get(cell, "")

    def overlapping_cells(self) -> list[tuple[Coord, tuple[str, ...]]]:
        """Cells carrying more than one region label, with all their labels."""
        seen: dict[Coord, list[str]] = {}
        for label in sorted(self.targets):
            for cell in self.targets[label]:
                seen.setdefault(cell, []).append(label)
        for cell in self.goal:
            seen.setdefault(cell, []).append(GOAL_LABEL)
        return [(c, tuple(ls)) for c, ls in sorted(seen.items()) if len(ls) > 1]

    @cached_property
    def move_validity(self) -> np.ndarray:
        """(height, width, 5) bool: [r, c, d] iff moving from free (c, r) by
        CONTROLS[d] lands on a free in-bounds cell."""
        free = self.free_mask
        valid = np.zeros((self.height, self.width, len(CONTROLS)), dtype=bool)
        for d, (dc, dr) in enumerate(OFFSETS):
            valid[:, :, d] = free & shifted(free, dc, dr, fill=False)
        return valid


def _shift_view(dst: np.ndarray, src: np.ndarray, dc: int, dr: int):
    """Slices such that dst[s0] = src[s1] realizes dst[r,c] = src[r+dr, c+dc]."""
    h, w = src.shape[-2:]
    if abs(dc) >= w or abs(dr) >= h:
        return None
    r0 = (slice(-dr, None) if dr < 0 else slice(None, h - dr or None)) if dr else slice(None)
    r1 = (slice(None, dr or None) if dr < 0 else slice(dr, None)) if dr else slice(None)
    c0 = (slice(-dc, None) if dc < 0 else slice(None, w - dc or None)) if dc else slice(None)
    c1 = (slice(None, dc or None) if dc < 0 else slice(dc, None)) if dc else slice(None)
    return (..., r0, c0), (..., r1, c1)


def shifted(values: np.ndarray, dc: int, dr: int, fill=0.0) -> np.ndarray:
    """out[..., r, c] = values[..., r+dr, c+dc], `fill` where out of bounds."""
    out = np.full_like(values, fill)
    views = _shift_view(out, values, dc, dr)
    if views is not None:
        out[views[0]] = values[views[1]]
    return out


def parse_map(text: str) -> GridMap:
    """Parse an ASCII map document.

    Characters: '#' obstacle, '.' free, 'I' start, 'A'-'E' target regions,
    'F' goal region, 'H' initial hazard cell.  Lines starting with ';' are
    comments.
    """
    lines = [line for line in text.splitlines() if not line.startswith(";")]
    while lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise InputError("map document is empty")
    width = len(lines[0])
    if width == 0 or any(len(line) != width for line in lines):
        raise InputError("map rows are ragged or empty")
    height = len(lines)

    occupancy = np.zeros((height, width), dtype=bool)
    starts: list[Coord] = []
    targets: dict[str, set[Coord]] = {}
    goal: set[Coord] = set()
    seeds: set[Coord] = set()
    for row, line in enumerate(lines):
        for col, ch in enumerate(line):
            cell = (col, row)
            if ch == OBSTACLE_CHAR:
                occupancy[row, col] = True
            elif ch == FREE_CHAR:
                pass
            elif ch == START_CHAR:
                starts.append(cell)
            elif ch == GOAL_CHAR:
                goal.add(cell)
            elif ch == HAZARD_CHAR:
                seeds.add(cell)
            elif ch in TARGET_CHARS:
                targets.setdefault(ch, set()).add(cell)
            else:
                raise InputError(f"unknown map character {ch!r} at {cell}")
    if len(starts) != 1:
        raise InputError(f"map must contain exactly one start cell, found {len(starts)}")
    return GridMap(
        width=width,
        height=height,
        occupancy=occupancy,
        start=starts[0],
        targets={k: frozenset(v) for k, v in sorted(targets.items())},
        goal=frozenset(goal),
        hazard_seeds=frozenset(seeds),
    )


def serialize_map(gmap: GridMap) -> str:
    """Render a GridMap back to its text form.

    Fails if a cell carries more than one printable role, since the text
    format has one character per cell.
    """
    chars = np.full((gmap.height, gmap.width), FREE_CHAR, dtype="<U1")
    chars[gmap.occupancy] = OBSTACLE_CHAR

    def put(cell: Coord, ch: str) -> None:
        col, row = cell
        if chars[row, col] != FREE_CHAR:
            raise InputError(f"cell {cell} has multiple roles; not text-representable")
        chars[row, col] = ch

    for label, cells in gmap.targets.items():
        for cell in cells:
            put(cell, label)
    for cell in gmap.goal:
        put(cell, GOAL_CHAR)
    for cell in gmap.hazard_seeds:
        put(cell, HAZARD_CHAR)
    put(gmap.start, START_CHAR)
    return "\n".join("".join(row) for row in chars) + "\n"


def neighbors(gmap: GridMap, x: Coord) -> list[Coord]:
    """Free cells at Manhattan distance 1 from x, in N, S, E, W order."""
    if not gmap.is_free(x):
        raise ValueError(f"{x} is not a free cell")
    out = []
    for u in CONTROLS[:-1]:
        dc, dr = CONTROL_OFFSETS[u]
        dest = (x[0] + dc, x[1] + dr)
        if gmap.is_free(dest):
            out.append(dest)
    return out


def valid_controls(gmap: GridMap, x: Coord) -> tuple[str, ...]:
    """Controls applicable at x: stay always, a direction iff its destination
    is free; returned in canonical order."""
    if not gmap.is_free(x):
        raise ValueError(f"{x} is not a free cell")
    out = []
    for u in CONTROLS:
        if u == STAY:
            out.append(u)
            continue
        dc, dr = CONTROL_OFFSETS[u]
        if gmap.is_free((x[0] + dc, x[1] + dr)):
            out.append(u)
    return tuple(out)


@dataclass
class MotionModel:
    """One-parameter stochastic motion: a commanded move is replaced by
    staying in place with probability `slip`. slip=0 is deterministic."""

    slip: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.slip <= 1.0:
            raise InputError(f"slip must be in [0, 1], got {self.slip}")


def destination(x: Coord, u: str) -> Coord:
    dc, dr = CONTROL_OFFSETS[u]
    return (x[0] + dc, x[1] + dr)


def motion_step(
    model: MotionModel, gmap: GridMap, x: Coord, u: str, rng: np.random.Generator
) -> Coord:
    """Sample the next robot cell.

    Consumes exactly one uniform draw iff slip > 0 and u is directional.
    """
    if u not in CONTROL_OFFSETS:
        raise ValueError(f"unknown control {u!r}")
    if u == STAY:
        return x
    dest = destination(x, u)
    if not gmap.is_free(dest):
        raise ValueError(f"control {u} at {x} is invalid: {dest} is not free")
    if model.slip > 0.0 and rng.random() < model.slip:
        return x
    return dest


def transition_distribution(
    model: MotionModel, gmap: GridMap, x: Coord, u: str
) -> list[tuple[Coord, float]]:
    """Support and probabilities of motion_step, for exact computations."""
    if u == STAY:
        return [(x, 1.0)]
    dest = destination(x, u)
    if not gmap.is_free(dest):
        raise ValueError(f"control {u} at {x} is invalid: {dest} is not free")
    if model.slip == 0.0:
        return [(dest, 1.0)]
    if model.slip == 1.0:
        return [(x, 1.0)]
    return [(dest, 1.0 - model.slip), (x, model.slip)]


def shortest_path(
    gmap: GridMap,
    start: Coord,
    goals: frozenset[Coord] | set[Coord],
    blocked: frozenset[Coord] | set[Coord] = frozenset(),
) -> list[Coord] | None:
    """BFS shortest path from start to the nearest goal cell, or None.

    Cells in `blocked` are treated as obstacles.  Expansion follows the
    canonical control order, so ties resolve deterministically.
    """
    if not gmap.is_free(start) or start in blocked:
        return None
    if start in goals:
        return [start]
    parent: dict[Coord, Coord] = {start: start}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        for u in CONTROLS[:-1]:
            nxt = destination(cell, u)
            if nxt in parent or not gmap.is_free(nxt) or nxt in blocked:
                continue
            parent[nxt] = cell
            if nxt in goals:
                path = [nxt]
                while path[-1] != start:
                    path.append(parent[path[-1]])
                path.reverse()
                return path
            queue.append(nxt)
    return None
