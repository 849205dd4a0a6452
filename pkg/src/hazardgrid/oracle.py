"""Exact full-state dynamic program on tiny grids.

Enumerates the complete hazard state space (bitmasks over free cells) and
solves the backward recursion over (automaton state, robot cell, hazard
state) with no decoupling.  Exists to validate the tractable planner, not
to plan: grids are capped at MAX_ENUM_FREE_CELLS free cells.

Robot-at-contaminated-cell combinations that cannot arise from consistent
histories (q not yet hazard while the robot's own cell burns) are forced
to value 0; consistent states never reference them, so reachable values
are unaffected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .automaton import MissionAutomaton, initial_automaton_state
from .grid import (
    CONTROLS,
    Coord,
    GridMap,
    MotionModel,
    STAY_INDEX,
    destination,
    transition_distribution,
)
from .hazard import FireModel, HazardEnumeration

# (time, automaton state, cell, hazard bitmask) -> control
OraclePolicy = Callable[[int, int, Coord, int], str]


@dataclass
class FullSolution:
    """Exact value function and policy over the enumerated state space."""

    gmap: GridMap
    aut: MissionAutomaton
    enum: HazardEnumeration
    horizon: int
    values: np.ndarray  # (N+1, n_q, k, 2^k)
    actions: np.ndarray  # (N, n_q, k, 2^k) int8
    y_0_mask: int
    r_star: float

    def value(self, t: int, q: int, x: Coord, y_mask: int) -> float:
        return float(self.values[t, q, self.enum.index[x], y_mask])

    def policy_fn(self) -> OraclePolicy:
        index = self.enum.index
        actions = self.actions

        def policy(t: int, q: int, x: Coord, y_mask: int) -> str:
            return CONTROLS[actions[t, q, index[x], y_mask]]

        return policy


def _arrival_states(aut: MissionAutomaton, gmap: GridMap, enum: HazardEnumeration):
    """(n_q, k) automaton successor when arriving clean at each free cell."""
    code_of = aut.code_of
    codes = [code_of.get(gmap.effective_label(cell), 0) for cell in enum.free]
    return aut.delta_clean[:, codes]


def _moves(gmap: GridMap, enum: HazardEnumeration) -> list[list[tuple[int, int]]]:
    """Per free-cell index, the valid (control index, destination index)."""
    out = []
    for cell in enum.free:
        pairs = []
        for d, u in enumerate(CONTROLS):
            dest = cell if u == CONTROLS[STAY_INDEX] else destination(cell, u)
            if gmap.is_free(dest):
                pairs.append((d, enum.index[dest]))
        out.append(pairs)
    return out


def solve_full(
    gmap: GridMap,
    aut: MissionAutomaton,
    motion: MotionModel,
    model: FireModel,
    y_0: np.ndarray,
    horizon: int,
) -> FullSolution:
    """Exact backward recursion; returns values, policy and r*_N for the
    map's start cell under y_0."""
    enum = HazardEnumeration(gmap)
    transition = enum.transition_matrix(model)
    bit = enum.bit_vectors
    k, n_states = enum.k, enum.n_states
    n_q = aut.n_states
    slip = float(motion.slip)

    arrival = _arrival_states(aut, gmap, enum)
    moves = _moves(gmap, enum)
    run_states = [q for q in range(n_q) if not aut.is_absorbing(q)]

    values = np.zeros((horizon + 1, n_q, k, n_states))
    for q in aut.finals:
        values[:, q] = 1.0
    actions = np.full((max(horizon, 0), n_q, k, n_states), STAY_INDEX, dtype=np.int8)

    for t in range(horizon, 0, -1):
        # Expected next value of arriving at each cell, before the motion mix.
        arrive = np.empty((n_q, k, n_states))
        for q in run_states:
            for i in range(k):
                v_clean = values[t, arrival[q, i], i]
                # Arriving at a burning cell absorbs into the hazard state.
                vec = np.where(bit[i], 0.0, v_clean)
                arrive[q, i] = transition @ vec
        for q in run_states:
            for i in range(k):
                q_u = np.full((len(CONTROLS), n_states), -np.inf)
                stay = arrive[q, i]
                for d, j in moves[i]:
                    if d == STAY_INDEX:
                        q_u[d] = stay
                    else:
                        q_u[d] = (1.0 - slip) * arrive[q, j] + slip * stay
                best = np.argmax(q_u, axis=0)
                values[t - 1, q, i] = np.max(q_u, axis=0)
                actions[t - 1, q, i] = best
                values[t - 1, q, i, bit[i]] = 0.0  # inconsistent combinations

    x_0 = gmap.start
    y_0_mask = enum.mask_of(np.asarray(y_0, dtype=bool))
    q_0 = initial_automaton_state(aut, gmap, x_0, np.asarray(y_0, dtype=bool))
    r_star = float(values[0, q_0, enum.index[x_0], y_0_mask])
    return FullSolution(
        gmap=gmap,
        aut=aut,
        enum=enum,
        horizon=horizon,
        values=values,
        actions=actions,
        y_0_mask=y_0_mask,
        r_star=r_star,
    )


def reach_prob_of_policy(
    policy: OraclePolicy,
    gmap: GridMap,
    aut: MissionAutomaton,
    motion: MotionModel,
    model: FireModel,
    y_0: np.ndarray,
    horizon: int,
) -> float:
    """Exact success probability of a memoryless policy by dense forward
    propagation of the (q, x, y) distribution.

    The policy is a function of (t, q, x, y); table policies simply ignore
    y.  Stateful agents (the replanner) carry memory outside (q, x, y) and
    are evaluated empirically instead.
    """
    enum = HazardEnumeration(gmap)
    transition = enum.transition_matrix(model)
    bit = enum.bit_vectors
    k, n_states = enum.k, enum.n_states
    n_q = aut.n_states

    arrival = _arrival_states(aut, gmap, enum)
    run_states = {q for q in range(n_q) if not aut.is_absorbing(q)}
    finals = aut.finals

    y_0 = np.asarray(y_0, dtype=bool)
    x_0 = gmap.start
    q_0 = initial_automaton_state(aut, gmap, x_0, y_0)
    if q_0 in finals:
        return 1.0
    if q_0 == aut.hazard:
        return 0.0

    dist = np.zeros((n_q, k, n_states))
    dist[q_0, enum.index[x_0], enum.mask_of(y_0)] = 1.0
    success = 0.0

    for t in range(horizon):
        new = np.zeros_like(dist)
        for q in run_states:
            for i in range(k):
                row = dist[q, i]
                if not row.any():
                    continue
                cell = enum.free[i]
                by_control: dict[str, np.ndarray] = {}
                for y_mask in np.nonzero(row)[0]:
                    u = policy(t, q, cell, int(y_mask))
                    sel = by_control.setdefault(u, np.zeros(n_states))
                    sel[y_mask] = row[y_mask]
                for u, mass in by_control.items():
                    for dest, weight in transition_distribution(motion, gmap, cell, u):
                        j = enum.index[dest]
                        moved = weight * (mass @ transition)
                        clean = np.where(bit[j], 0.0, moved)
                        q_next = int(arrival[q, j])
                        if q_next in finals:
                            success += float(clean.sum())
                        else:
                            new[q_next, j] += clean
        dist = new
    return success
