"""Mission compilation to a deterministic, non-blocking finite automaton.

A mission is an ordered list of stages; each stage is an unordered set of
region labels that must all be visited before the next stage starts.  The
compiled automaton reads, per time step, the region label of the robot's
new cell plus a contaminated flag.  Entering a contaminated cell from any
non-final state is absorbing failure; reaching the final state is
absorbing success, even if contamination arrives later.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .grid import CONTROLS, Coord, GridMap, GOAL_LABEL, destination

Stage = frozenset[str]


@dataclass(frozen=True)
class MissionSpec:
    """Ordered stages of unordered label sets, e.g. [{'A','B'}, {'F'}]."""

    stages: tuple[Stage, ...]

    def __post_init__(self) -> None:
        if not self.stages:
            raise InputError("mission must have at least one stage")
        for stage in self.stages:
            if not stage:
                raise InputError("mission stages must be non-empty")

    @classmethod
    def from_lists(cls, stages) -> "MissionSpec":
        return cls(tuple(frozenset(str(lb) for lb in stage) for stage in stages))

    def to_lists(self) -> list[list[str]]:
        return [sorted(stage) for stage in self.stages]


# State descriptors used during compilation: ("run", stage_index, done_set),
# ("accept",) and ("hazard",).
_ACCEPT = ("accept",)
_HAZARD = ("hazard",)


def _advance(stages: tuple[Stage, ...], desc, label: str):
    """Label-driven successor of a run descriptor.

    A label only counts toward the stage active when it fires; completing a
    stage activates the next one starting from the following step (no
    cascade within one event).
    """
    if desc in (_ACCEPT, _HAZARD):
        return desc
    _, i, done = desc
    if label and label in stages[i] and label not in done:
        done = done | {label}
        if done == stages[i]:
            return _ACCEPT if i + 1 == len(stages) else ("run", i + 1, frozenset())
        return ("run", i, done)
    return desc


@dataclass
class MissionAutomaton:
    """Compiled deterministic automaton over (region label, contaminated)."""

    mission: MissionSpec
    labels: tuple[str, ...]  # alphabet; index 0 is the blank label ''
    n_states: int
    initial: int
    finals: frozenset[int]
    hazard: int
    delta_clean: np.ndarray  # (n_states, n_labels) int64 successor table
    info: tuple = field(default=())  # per-state descriptors, hazard last

    @property
    def code_of(self) -> dict[str, int]:
        return {lb: i for i, lb in enumerate(self.labels)}

    def state_info(self, q: int):
        return self.info[q]

    def is_absorbing(self, q: int) -> bool:
        return q == self.hazard or q in self.finals


def compile_mission(spec: MissionSpec, gmap: GridMap) -> MissionAutomaton:
    """Build the automaton for a mission over the map's regions.

    The initial state already reflects the region label of the map's start
    cell, so a mission whose first obligation is satisfied at the start
    compiles to an initial state past it.  State count is the reachable
    subset of the per-stage subset lattice, plus accept and hazard.
    """
    available = set(gmap.targets)
    if gmap.goal:
        available.add(GOAL_LABEL)
    for stage in spec.stages:
        for label in stage:
            if label not in available:
                raise InputError(f"mission references unknown region {label!r}")

    alphabet = ("",) + tuple(sorted(available))
    stages = spec.stages
    start_desc = _advance(stages, ("run", 0, frozenset()), gmap.effective_label(gmap.start))

    reachable = {start_desc}
    frontier = deque([start_desc])
    while frontier:
        desc = frontier.popleft()
        for label in alphabet:
            nxt = _advance(stages, desc, label)
            if nxt not in reachable:
                reachable.add(nxt)
                frontier.append(nxt)

    run_descs = sorted(
        (d for d in reachable if d not in (_ACCEPT, _HAZARD)),
        key=lambda d: (d[1], tuple(sorted(d[2]))),
    )
    descs = run_descs + [_ACCEPT, _HAZARD]
    index = {d: i for i, d in enumerate(descs)}
    n = len(descs)

    delta_clean = np.empty((n, len(alphabet)), dtype=np.int64)
    for d, desc in enumerate(descs):
        for c, label in enumerate(alphabet):
            delta_clean[d, c] = index[_advance(stages, desc, label)]

    return MissionAutomaton(
        mission=spec,
        labels=alphabet,
        n_states=n,
        initial=index[start_desc],
        finals=frozenset({index[_ACCEPT]}),
        hazard=index[_HAZARD],
        delta_clean=delta_clean,
        info=tuple(descs),
    )


def delta(
    aut: MissionAutomaton, q: int, x_next: Coord, contaminated: bool, gmap: GridMap
) -> int:
    """Total transition function of the compiled automaton.

    Final states and the hazard state absorb; a contaminated destination
    forces the hazard state from any other state regardless of its label.
    """
    if q == aut.hazard or q in aut.finals:
        return q
    if contaminated:
        return aut.hazard
    code = aut.code_of.get(gmap.effective_label(x_next), 0)
    return int(aut.delta_clean[q, code])


def initial_automaton_state(
    aut: MissionAutomaton, gmap: GridMap, x_0: Coord, y_0: np.ndarray
) -> int:
    """Automaton state at t=0: the compiled initial state, or hazard if the
    start cell is already contaminated."""
    if y_0[x_0[1], x_0[0]] and aut.initial not in aut.finals:
        return aut.hazard
    return aut.initial


@dataclass
class PartitionReport:
    """Outcome of checking the label/flag partition assumptions."""

    overlaps: list[tuple[Coord, tuple[str, ...]]]
    total: bool
    deterministic: bool

    @property
    def ok(self) -> bool:
        return not self.overlaps and self.total and self.deterministic


def validate_partition(aut: MissionAutomaton, gmap: GridMap) -> PartitionReport:
    """Report violations of the disjoint-region assumption and confirm the
    transition function is total and deterministic over (cell, flag).

    Overlapping labels are not fatal: compilation resolves them with the
    documented precedence (hazard flag, then goal, then lexicographic
    targets).
    """
    overlaps = gmap.overlapping_cells()
    n, m = aut.delta_clean.shape
    total = bool(
        np.all((aut.delta_clean >= 0) & (aut.delta_clean < n)) and m == len(aut.labels)
    )
    deterministic = True
    for q in list(aut.finals) + [aut.hazard]:
        if not np.all(aut.delta_clean[q] == q):
            deterministic = False
    return PartitionReport(overlaps=overlaps, total=total, deterministic=deterministic)


def product_bfs_reachable(
    aut: MissionAutomaton, gmap: GridMap, x_0: Coord, horizon: int
) -> int | None:
    """Minimal number of steps driving (initial, x_0) into a final state in
    the hazard-free product graph; None if more than `horizon` steps.

    The label of x_0 itself is assumed to be reflected in the automaton's
    initial state (as compile_mission does for the map's start cell).
    """
    if aut.initial in aut.finals:
        return 0
    if not gmap.is_free(x_0):
        raise ValueError(f"{x_0} is not a free cell")
    seen = {(aut.initial, x_0)}
    frontier: deque[tuple[int, Coord, int]] = deque([(aut.initial, x_0, 0)])
    while frontier:
        q, x, steps = frontier.popleft()
        if steps >= horizon:
            continue
        for u in CONTROLS:
            x_next = destination(x, u) if u != "0" else x
            if not gmap.is_free(x_next):
                continue
            q_next = delta(aut, q, x_next, False, gmap)
            if q_next in aut.finals:
                return steps + 1
            if (q_next, x_next) not in seen:
                seen.add((q_next, x_next))
                frontier.append((q_next, x_next, steps + 1))
    return None
