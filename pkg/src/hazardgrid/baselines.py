"""Comparison agents.

A reactive replanner that follows a shortest path on currently known
obstacles, treats observed contamination as permanently blocked, and
recomputes whenever the stored path is invalidated (the observable
behavior of incremental replanners); and the coupling-ignoring DP that
scores cells by their unconditional contamination probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .automaton import MissionAutomaton
from .grid import (
    CONTROL_OFFSETS,
    Coord,
    GridMap,
    GOAL_LABEL,
    MotionModel,
    OFFSETS,
    STAY,
    manhattan,
    shifted,
    shortest_path,
)
from .hazard import FireModel, iter_episode_chunks
from .planner import Policy, ValueTable, solve


def region_cells(gmap: GridMap, label: str) -> frozenset[Coord]:
    if label == GOAL_LABEL:
        return gmap.goal
    return gmap.targets[label]


@dataclass
class ReplannerState:
    """Mutable per-rollout memory of the replanning agent."""

    known_blocked: set[Coord] = field(default_factory=set)
    path: list[Coord] = field(default_factory=list)
    replan_count: int = 0


def replanner_step(
    state: ReplannerState,
    gmap: GridMap,
    x: Coord,
    observation: frozenset[Coord] | set[Coord],
    waypoint: frozenset[Coord] | set[Coord],
) -> str:
    """Merge observed contamination, replan if the stored path is invalid,
    and return the next move (stay when no path exists)."""
    state.known_blocked.update(observation)
    path = state.path
    invalid = (
        not path
        or path[0] != x
        or path[-1] not in waypoint
        or any(cell in state.known_blocked for cell in path)
    )
    if invalid:
        state.path = shortest_path(gmap, x, waypoint, blocked=state.known_blocked) or []
        state.replan_count += 1
    if len(state.path) < 2:
        return STAY
    nxt = state.path[1]
    state.path = state.path[1:]
    move = (nxt[0] - x[0], nxt[1] - x[1])
    for u, off in CONTROL_OFFSETS.items():
        if off == move:
            return u
    return STAY


class MissionReplanner:
    """Replanning agent for staged missions: heads for the nearest
    unfinished target of the current stage (Manhattan distance, label-order
    tie-break), advancing stages through the automaton state it observes."""

    def __init__(self, gmap: GridMap, aut: MissionAutomaton, visibility_radius: int = 2):
        self.gmap = gmap
        self.aut = aut
        self.visibility_radius = visibility_radius
        self.state = ReplannerState()

    def reset(self) -> None:
        self.state = ReplannerState()

    def _waypoint(self, x: Coord, q: int) -> frozenset[Coord] | None:
        info = self.aut.state_info(q)
        if info[0] != "run":
            return None
        stage = self.aut.mission.stages[info[1]]
        unfinished = sorted(stage - info[2])
        if not unfinished:
            return None
        label = min(
            unfinished,
            key=lambda lb: (min(manhattan(x, c) for c in region_cells(self.gmap, lb)), lb),
        )
        return region_cells(self.gmap, label)

    def observe(self, x: Coord, q: int, t: int, visible: frozenset[Coord]) -> str:
        waypoint = self._waypoint(x, q)
        if waypoint is None:
            return STAY
        return replanner_step(self.state, self.gmap, x, visible, waypoint)


def mission_replanner(
    gmap: GridMap, aut: MissionAutomaton, visibility_radius: int = 2
) -> MissionReplanner:
    return MissionReplanner(gmap, aut, visibility_radius=visibility_radius)


@dataclass
class UnconditionalTable:
    """Per-cell contamination frequencies with no conditioning on the
    robot's previous cell; plugs into the same recursion as StpTable."""

    horizon: int
    episodes: int
    contaminated: np.ndarray  # (N+1, h, w) float64 frequencies

    def contamination_grid(self, t: int) -> np.ndarray:
        if not 1 <= t <= self.horizon:
            raise ValueError(f"t={t} outside 1..{self.horizon}")
        p = self.contaminated[t]
        out = np.empty(p.shape + (5,))
        for d, (dc, dr) in enumerate(OFFSETS):
            out[:, :, d] = shifted(p, dc, dr)
        return out

    def probability(self, t: int, x: Coord, x_next: Coord) -> float:
        if not 1 <= t <= self.horizon:
            raise ValueError(f"t={t} outside 1..{self.horizon}")
        if manhattan(x, x_next) > 1:
            raise ValueError(f"{x_next} is not adjacent to {x}")
        return float(self.contaminated[t, x_next[1], x_next[0]])


def unconditional_table(episodes: np.ndarray) -> UnconditionalTable:
    """Frequencies from a materialized (E, N+1, h, w) episode array."""
    if episodes.ndim != 4 or episodes.shape[0] == 0:
        raise ValueError("episode collection is empty or malformed")
    freq = episodes.mean(axis=0, dtype=np.float64)
    return UnconditionalTable(
        horizon=episodes.shape[1] - 1, episodes=episodes.shape[0], contaminated=freq
    )


def unconditional_table_streamed(
    model: FireModel,
    gmap: GridMap,
    y_0: np.ndarray,
    horizon: int,
    episodes: int,
    master_seed: int,
) -> UnconditionalTable:
    """Streaming variant sharing the episode streams of build_table, so the
    naive and conditional tables see identical episodes for a given seed."""
    counts = np.zeros((horizon + 1, gmap.height, gmap.width), dtype=np.int64)
    for start, states in iter_episode_chunks(model, gmap, y_0, horizon, episodes, master_seed):
        del start
        counts += states.sum(axis=0)
    return UnconditionalTable(
        horizon=horizon, episodes=episodes, contaminated=counts / float(episodes)
    )


def naive_dp(
    gmap: GridMap,
    aut: MissionAutomaton,
    motion: MotionModel,
    episodes: np.ndarray,
    horizon: int,
) -> tuple[ValueTable, Policy]:
    """The same backward recursion as the planner, but the contamination
    probability of a move is the unconditional frequency of the destination
    cell being contaminated at t."""
    return solve(gmap, aut, motion, unconditional_table(episodes), horizon)
