"""Safe-transition-probability machinery.

For every ordered pair of free cells (x, x') at Manhattan distance <= 1
(the stay pair included) and every time t in 1..N, the table holds Monte
Carlo counts for the event "x' contaminated at t" conditioned on "x clean
at t-1", estimated over a shared set of hazard episodes.  The per-episode
streams are keyed by (master seed, episode index), so doubling the episode
count extends rather than reshuffles the sample.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .automaton import MissionAutomaton, delta
from .errors import ResourceLimitError
from .grid import CONTROLS, Coord, GridMap, OFFSETS, manhattan, shifted
from .hazard import FireModel, HazardEnumeration, iter_episode_chunks

log = logging.getLogger(__name__)

DEFAULT_MAX_ENTRIES = 200_000_000


@dataclass
class StpTable:
    """Conditional contamination counts for all neighbor pairs and times.

    c_prev[t, r, c] counts episodes with (c, r) clean at t-1; c_hit[t, r,
    c, d] counts those of them with the destination of CONTROLS[d]
    contaminated at t.  The estimate is the exact ratio evaluated lazily;
    when the conditioning event never occurred the degenerate fallback is
    1.0 (transitions through a cell that is never clean are treated as
    doomed).
    """

    horizon: int
    episodes: int
    master_seed: int
    c_prev: np.ndarray  # (N+1, h, w) int64; row 0 unused
    c_hit: np.ndarray  # (N+1, h, w, 5) int64; row 0 unused
    valid: np.ndarray  # (h, w, 5) bool, pair validity

    def _direction(self, x: Coord, x_next: Coord) -> int:
        move = (x_next[0] - x[0], x_next[1] - x[1])
        for d, off in enumerate(OFFSETS):
            if off == move:
                return d
        raise ValueError(f"{x_next} is not reachable from {x} in one step")

    def counts(self, t: int, x: Coord, x_next: Coord) -> tuple[float, int, int]:
        """(estimate, conditioning count, hit count) for one pair."""
        if not 1 <= t <= self.horizon:
            raise ValueError(f"t={t} outside 1..{self.horizon}")
        d = self._direction(x, x_next)
        col, row = x
        if not self.valid[row, col, d]:
            raise ValueError(f"pair {x}->{x_next} is not a free neighbor pair")
        c_prev = int(self.c_prev[t, row, col])
        c_hit = int(self.c_hit[t, row, col, d])
        return (c_hit / c_prev if c_prev > 0 else 1.0), c_prev, c_hit

    def probability(self, t: int, x: Coord, x_next: Coord) -> float:
        return self.counts(t, x, x_next)[0]

    def contamination_grid(self, t: int) -> np.ndarray:
        """(h, w, 5) float: estimate for the pair (x, x + offset[d]) at t,
        fallback applied; entries at invalid pairs are meaningless."""
        if not 1 <= t <= self.horizon:
            raise ValueError(f"t={t} outside 1..{self.horizon}")
        c_prev = self.c_prev[t][:, :, None].astype(np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = self.c_hit[t] / c_prev
        return np.where(c_prev > 0, ratio, 1.0)


def estimate_pair(
    episodes: np.ndarray, t: int, x: Coord, x_next: Coord
) -> tuple[float, int, int]:
    """Monte Carlo estimate for one pair from a materialized episode array
    of shape (E, N+1, h, w): counts episodes with x clean at t-1, and among
    them those with x' contaminated at t."""
    if episodes.ndim != 4 or episodes.shape[0] == 0:
        raise ValueError("episode collection is empty or malformed")
    horizon = episodes.shape[1] - 1
    if not 1 <= t <= horizon:
        raise ValueError(f"t={t} outside 1..{horizon}")
    if manhattan(x, x_next) > 1:
        raise ValueError(f"{x_next} is not in the stay-extended neighborhood of {x}")
    clean_prev = ~episodes[:, t - 1, x[1], x[0]]
    c_prev = int(np.count_nonzero(clean_prev))
    c_hit = int(np.count_nonzero(clean_prev & episodes[:, t, x_next[1], x_next[0]]))
    return (c_hit / c_prev if c_prev > 0 else 1.0), c_prev, c_hit


def _accumulate(states: np.ndarray, c_prev: np.ndarray, c_hit: np.ndarray) -> None:
    clean_prev = ~states[:, :-1]  # (B, N, h, w)
    c_prev[1:] += clean_prev.sum(axis=0)
    after = states[:, 1:]
    for d, (dc, dr) in enumerate(OFFSETS):
        hits = clean_prev & shifted(after, dc, dr, fill=False)
        c_hit[1:, :, :, d] += hits.sum(axis=0)


def _count_range(args) -> tuple[np.ndarray, np.ndarray]:
    model, gmap, y_0, horizon, count, master_seed, start = args
    h, w = gmap.height, gmap.width
    c_prev = np.zeros((horizon + 1, h, w), dtype=np.int64)
    c_hit = np.zeros((horizon + 1, h, w, len(CONTROLS)), dtype=np.int64)
    for offset, states in iter_episode_chunks(
        model, gmap, y_0, horizon, count, master_seed, first_index=start
    ):
        del offset
        _accumulate(states, c_prev, c_hit)
    return c_prev, c_hit


def build_table(
    model: FireModel,
    gmap: GridMap,
    y_0: np.ndarray,
    horizon: int,
    episodes: int,
    master_seed: int,
    max_entries: int = DEFAULT_MAX_ENTRIES,
    workers: int = 1,
) -> StpTable:
    """Sample episodes and count all pairs at all t <= N.

    Deterministic given (master_seed, episodes) regardless of worker count
    or chunking: episode e always uses the stream keyed by (master_seed, e)
    and partial counts merge by addition.
    """
    if episodes < 1:
        raise ValueError("episode count must be at least 1")
    h, w = gmap.height, gmap.width
    entries = (horizon + 1) * h * w * (len(CONTROLS) + 1)
    if entries > max_entries:
        raise ResourceLimitError(
            f"table of {entries} entries exceeds the cap of {max_entries}"
        )
    c_prev = np.zeros((horizon + 1, h, w), dtype=np.int64)
    c_hit = np.zeros((horizon + 1, h, w, len(CONTROLS)), dtype=np.int64)
    if workers > 1 and episodes > 1:
        # Episode streams are keyed by absolute index, so the split is
        # invisible in the counts and the merge is plain integer addition.
        per = -(-episodes // workers)
        jobs = [
            (model, gmap, y_0, horizon, min(per, episodes - s), master_seed, s)
            for s in range(0, episodes, per)
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part_prev, part_hit in pool.map(_count_range, jobs):
                c_prev += part_prev
                c_hit += part_hit
    else:
        for start, states in iter_episode_chunks(
            model, gmap, y_0, horizon, episodes, master_seed
        ):
            del start
            _accumulate(states, c_prev, c_hit)
    return StpTable(
        horizon=horizon,
        episodes=episodes,
        master_seed=master_seed,
        c_prev=c_prev,
        c_hit=c_hit,
        valid=gmap.move_validity.copy(),
    )


class ExactPairOracle:
    """Exact conditional contamination probabilities on tiny grids, by
    forward propagation over the enumerated hazard state space with the
    conditioning applied at t-1."""

    def __init__(self, model: FireModel, gmap: GridMap, y_0: np.ndarray):
        self.enum = HazardEnumeration(gmap)
        self.transition = self.enum.transition_matrix(model)
        self.y_0_mask = self.enum.mask_of(y_0)
        self._dists: list[np.ndarray] = []

    def _distribution(self, t: int) -> np.ndarray:
        while len(self._dists) <= t:
            if not self._dists:
                d = np.zeros(self.enum.n_states)
                d[self.y_0_mask] = 1.0
            else:
                d = self._dists[-1] @ self.transition
            self._dists.append(d)
        return self._dists[t]

    def pair(self, t: int, x: Coord, x_next: Coord) -> float:
        if t < 1:
            raise ValueError("t must be at least 1")
        if manhattan(x, x_next) > 1:
            raise ValueError(f"{x_next} is not in the stay-extended neighborhood of {x}")
        dist_prev = self._distribution(t - 1)
        clean = ~self.enum.bit_vectors[self.enum.index[x]]
        mass = float(dist_prev[clean].sum())
        if mass <= 0.0:
            log.warning(
                "conditioning event [y_%d]_%s = 0 has probability 0; "
                "returning degenerate fallback 1.0",
                t - 1,
                x,
            )
            return 1.0
        conditioned = np.where(clean, dist_prev, 0.0) / mass
        dist_t = conditioned @ self.transition
        return float(dist_t[self.enum.bit_vectors[self.enum.index[x_next]]].sum())


def exact_pair(
    model: FireModel,
    gmap: GridMap,
    y_0: np.ndarray,
    t: int,
    x: Coord,
    x_next: Coord,
) -> float:
    """One-shot exact counterpart of estimate_pair (tiny grids only)."""
    return ExactPairOracle(model, gmap, y_0).pair(t, x, x_next)


def compact_kernel(
    aut: MissionAutomaton,
    table: StpTable,
    t: int,
    q: int,
    q_next: int,
    x: Coord,
    x_next: Coord,
    gmap: GridMap,
) -> float:
    """Marginal probability of the automaton jumping q -> q_next when the
    robot moves x -> x_next at time t.

    The hazard state receives the conditional contamination estimate; the
    unique clean successor receives the complement; absorbing states keep
    identity rows.  Rows sum to 1 exactly.
    """
    if q == aut.hazard:
        return 1.0 if q_next == aut.hazard else 0.0
    if q in aut.finals:
        return 1.0 if q_next == q else 0.0
    p = table.probability(t, x, x_next)
    if q_next == aut.hazard:
        return p
    return (1.0 - p) if q_next == delta(aut, q, x_next, False, gmap) else 0.0


def export_csv(table: StpTable, path) -> None:
    """Diagnostic CSV dump: t,x_col,x_row,dir,c_prev,c_hit,p_hat."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,x_col,x_row,dir,c_prev,c_hit,p_hat\n")
        h, w = table.c_prev.shape[1:]
        for t in range(1, table.horizon + 1):
            for row in range(h):
                for col in range(w):
                    for d, u in enumerate(CONTROLS):
                        if not table.valid[row, col, d]:
                            continue
                        p, c_prev, c_hit = table.counts(t, (col, row), _dest((col, row), d))
                        fh.write(f"{t},{col},{row},{u},{c_prev},{c_hit},{p!r}\n")


def _dest(x: Coord, d: int) -> Coord:
    dc, dr = OFFSETS[d]
    return (x[0] + dc, x[1] + dr)
