"""Backward dynamic program over (automaton state, cell).

Solves the finite-horizon recursion in which the hazard enters only
through the conditional contamination table: arriving clean at x' keeps
the mission's label-driven successor, arriving contaminated absorbs into
the hazard state (value 0).  Values are success probabilities in [0, 1];
the hazard row is identically 0 and final rows identically 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .automaton import MissionAutomaton, delta
from .grid import (
    CONTROLS,
    Coord,
    GridMap,
    MotionModel,
    OFFSETS,
    STAY_INDEX,
    destination,
    shifted,
)

N_DIRECTIONAL = len(CONTROLS) - 1  # stay is last


@dataclass
class ValueTable:
    """values[t, q, row, col] for t in 0..N; obstacle cells hold 0."""

    horizon: int
    values: np.ndarray


@dataclass
class Policy:
    """Time-indexed optimal controls with the values they achieve.

    actions[t, q, row, col] indexes CONTROLS; ties are broken by the first
    maximizer in canonical order N, S, E, W, stay.  Rows for absorbing
    automaton states and obstacle cells hold the stay control.
    """

    horizon: int
    actions: np.ndarray
    values: np.ndarray


def _check_inputs(gmap: GridMap, aut: MissionAutomaton, table, horizon: int) -> None:
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if table.horizon < horizon:
        raise ValueError(
            f"table horizon {table.horizon} is shorter than requested {horizon}"
        )
    if horizon >= 1:
        probe = table.contamination_grid(1)
        if probe.shape != (gmap.height, gmap.width, len(CONTROLS)):
            raise ValueError("contamination table does not match the map dimensions")
    for label in aut.labels[1:]:
        if label != "F" and label not in gmap.targets:
            raise ValueError(f"automaton label {label!r} missing from the map")


def solve(
    gmap: GridMap,
    aut: MissionAutomaton,
    motion: MotionModel,
    table,
    horizon: int,
) -> tuple[ValueTable, Policy]:
    """Run the backward recursion and extract the time-indexed policy.

    `table` provides contamination_grid(t) -> (h, w, 5): the probability
    that the destination of each control is contaminated at t, given the
    source cell clean at t-1 (StpTable) or unconditionally (the naive
    baseline table).
    """
    _check_inputs(gmap, aut, table, horizon)
    h, w = gmap.height, gmap.width
    n_q = aut.n_states
    free = gmap.free_mask
    valid = np.moveaxis(gmap.move_validity, -1, 0)  # (5, h, w)
    slip = float(motion.slip)

    code_grid = np.zeros((h, w), dtype=np.int64)
    code_of = aut.code_of
    for col, row in gmap.free_cells():
        code_grid[row, col] = code_of.get(gmap.effective_label((col, row)), 0)
    # Successor automaton state when arriving clean at each cell.
    dest_q = aut.delta_clean[:, code_grid.reshape(-1)].reshape(n_q, h, w)

    rr, cc = np.indices((h, w))
    run_states = [q for q in range(n_q) if not aut.is_absorbing(q)]

    values = np.zeros((horizon + 1, n_q, h, w))
    for q in aut.finals:
        values[:, q][:, free] = 1.0
    actions = np.full((max(horizon, 0), n_q, h, w), STAY_INDEX, dtype=np.int8)

    q_values = np.empty((len(CONTROLS), h, w))
    for t in range(horizon, 0, -1):
        contamination = table.contamination_grid(t)  # (h, w, 5)
        for q in run_states:
            arrival = values[t, dest_q[q], rr, cc]
            w_stay = (1.0 - contamination[:, :, STAY_INDEX]) * arrival
            for d in range(N_DIRECTIONAL):
                dc, dr = OFFSETS[d]
                moved = (1.0 - contamination[:, :, d]) * shifted(arrival, dc, dr)
                q_values[d] = (1.0 - slip) * moved + slip * w_stay
            q_values[STAY_INDEX] = w_stay
            q_values[~valid] = -np.inf
            best = np.argmax(q_values, axis=0)
            values[t - 1, q] = np.where(free, np.max(q_values, axis=0), 0.0)
            actions[t - 1, q] = np.where(free, best, STAY_INDEX)
    vt = ValueTable(horizon=horizon, values=values)
    return vt, Policy(horizon=horizon, actions=actions, values=values)


def bellman_backup(
    gmap: GridMap,
    aut: MissionAutomaton,
    motion: MotionModel,
    table,
    values_t: np.ndarray,
    t: int,
    q: int,
    x: Coord,
) -> tuple[float, str]:
    """Scalar recomputation of one backward step from values at time t.

    Evaluates the same expressions in the same order as solve(), so the
    result matches the stored V_{t-1}(q, x) bit for bit.
    """
    if q == aut.hazard:
        return 0.0, CONTROLS[STAY_INDEX]
    if q in aut.finals:
        return 1.0, CONTROLS[STAY_INDEX]
    col, row = x
    if not gmap.is_free(x):
        raise ValueError(f"{x} is not a free cell")
    slip = float(motion.slip)

    def arrival_value(cell: Coord) -> float:
        q_next = delta(aut, q, cell, False, gmap)
        return float(values_t[q_next, cell[1], cell[0]])

    p_stay = table.probability(t, x, x)
    w_stay = (1.0 - p_stay) * arrival_value(x)
    best = -np.inf
    best_u = CONTROLS[STAY_INDEX]
    for d, u in enumerate(CONTROLS):
        if not gmap.move_validity[row, col, d]:
            continue
        if u == CONTROLS[STAY_INDEX]:
            q_u = w_stay
        else:
            dest = destination(x, u)
            q_u = (1.0 - slip) * (
                (1.0 - table.probability(t, x, dest)) * arrival_value(dest)
            ) + slip * w_stay
        if q_u > best:
            best, best_u = q_u, u
    return float(best), best_u


def value_at(vt: ValueTable, t: int, q: int, x: Coord) -> float:
    if not 0 <= t <= vt.horizon:
        raise ValueError(f"t={t} outside 0..{vt.horizon}")
    n_q, h, w = vt.values.shape[1:]
    col, row = x
    if not (0 <= q < n_q and 0 <= col < w and 0 <= row < h):
        raise ValueError(f"state (q={q}, x={x}) out of range")
    return float(vt.values[t, q, row, col])


def act(policy: Policy, t: int, q: int, x: Coord) -> str:
    if not 0 <= t < policy.horizon:
        raise ValueError(f"t={t} outside 0..{policy.horizon - 1}")
    n_q, h, w = policy.actions.shape[1:]
    col, row = x
    if not (0 <= q < n_q and 0 <= col < w and 0 <= row < h):
        raise ValueError(f"state (q={q}, x={x}) out of range")
    return CONTROLS[policy.actions[t, q, row, col]]
