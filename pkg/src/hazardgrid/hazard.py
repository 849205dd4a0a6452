"""Stochastic hazard spread over the grid.

A hazard state is a boolean matrix of shape (height, width); True marks a
contaminated cell.  Contamination is absorbing, never occupies obstacle
cells, and spreads to a clean free cell independently per step with a
probability driven by its contaminated direct and diagonal neighbors.
Off-grid neighbors count as uncontaminated.

An episode is the (N+1, height, width) stack of states y_0..y_N.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import InputError, ResourceLimitError
from .grid import Coord, GridMap, shifted

DIAGONAL_SCALE = 1.0 / math.sqrt(2.0)

DIRECT_OFFSETS = ((0, -1), (0, 1), (1, 0), (-1, 0))
DIAGONAL_OFFSETS = ((1, 1), (1, -1), (-1, 1), (-1, -1))

# Enumeration of the full hazard state space is only viable on tiny grids.
MAX_ENUM_FREE_CELLS = 12


@dataclass
class FireModel:
    """Per-cell spread susceptibility p_f; diagonal neighbors contribute with
    p_f scaled by 1/sqrt(2)."""

    p_f: np.ndarray  # (height, width) float64

    def __post_init__(self) -> None:
        self.p_f = np.asarray(self.p_f, dtype=np.float64)
        if np.any((self.p_f < 0.0) | (self.p_f > 1.0)):
            raise InputError("p_f values must lie in [0, 1]")

    @classmethod
    def uniform(cls, gmap: GridMap, p: float) -> "FireModel":
        return cls(p_f=np.full((gmap.height, gmap.width), float(p)))

    def with_overrides(self, overrides: dict[Coord, float]) -> "FireModel":
        p = self.p_f.copy()
        for (col, row), value in overrides.items():
            p[row, col] = value
        return FireModel(p_f=p)

    def digest(self) -> str:
        """Content hash used to key episode and estimate caches."""
        h = hashlib.sha256()
        h.update(np.array(self.p_f.shape, dtype=np.int64).tobytes())
        h.update(self.p_f.tobytes())
        return h.hexdigest()


def initial_state(gmap: GridMap) -> np.ndarray:
    """Hazard state with exactly the map's seed cells contaminated."""
    y = np.zeros((gmap.height, gmap.width), dtype=bool)
    for col, row in gmap.hazard_seeds:
        y[row, col] = True
    return y


def _check_state(gmap: GridMap, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=bool)
    if y.shape[-2:] != (gmap.height, gmap.width):
        raise ValueError(
            f"hazard state shape {y.shape} does not match grid "
            f"({gmap.height}, {gmap.width})"
        )
    if np.any(y & gmap.occupancy):
        raise ValueError("hazard state marks an obstacle cell as contaminated")
    return y


def neighbor_counts(gmap: GridMap, y: np.ndarray, x: Coord) -> tuple[int, int]:
    """(direct, diagonal) contaminated neighbor counts of free cell x."""
    if not gmap.is_free(x):
        raise ValueError(f"{x} is not a free cell")
    col, row = x
    direct = sum(
        1
        for dc, dr in DIRECT_OFFSETS
        if gmap.in_bounds((col + dc, row + dr)) and y[row + dr, col + dc]
    )
    diagonal = sum(
        1
        for dc, dr in DIAGONAL_OFFSETS
        if gmap.in_bounds((col + dc, row + dr)) and y[row + dr, col + dc]
    )
    return direct, diagonal


def p_safe(model: FireModel, gmap: GridMap, y: np.ndarray, x: Coord) -> float:
    """Probability that clean cell x stays clean for one more step."""
    if not gmap.is_free(x):
        raise ValueError(f"{x} is not a free cell")
    if y[x[1], x[0]]:
        raise ValueError(f"{x} is already contaminated")
    n_f, d_f = neighbor_counts(gmap, y, x)
    p = float(model.p_f[x[1], x[0]])
    return (1.0 - p) ** n_f * (1.0 - p * DIAGONAL_SCALE) ** d_f


def ignition_grid(model: FireModel, gmap: GridMap, y: np.ndarray) -> np.ndarray:
    """Per-cell probability 1 - p_safe of fresh contamination at the next
    step.  Supports batched states (..., height, width); values at already
    contaminated or obstacle cells are not meaningful."""
    n_f = np.zeros(y.shape, dtype=np.int8)
    for dc, dr in DIRECT_OFFSETS:
        n_f += shifted(y, dc, dr, fill=False)
    d_f = np.zeros(y.shape, dtype=np.int8)
    for dc, dr in DIAGONAL_OFFSETS:
        d_f += shifted(y, dc, dr, fill=False)
    stay = (1.0 - model.p_f) ** n_f * (1.0 - model.p_f * DIAGONAL_SCALE) ** d_f
    return 1.0 - stay


def _advance(
    model: FireModel, gmap: GridMap, y: np.ndarray, uniforms: np.ndarray
) -> np.ndarray:
    fresh = (uniforms < ignition_grid(model, gmap, y)) & ~y & gmap.free_mask
    return y | fresh


def step(
    model: FireModel, gmap: GridMap, y: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """One spread step.  Consumes exactly one (height, width) uniform block
    from rng regardless of the current state, so chunked and sequential
    sampling of the same stream produce identical episodes."""
    y = _check_state(gmap, y)
    return _advance(model, gmap, y, rng.random((gmap.height, gmap.width)))


def transition_prob(
    model: FireModel, gmap: GridMap, y_next: np.ndarray, y: np.ndarray
) -> float:
    """Exact one-step probability of y -> y_next.

    Product of the per-cell factors: a contaminated cell stays contaminated
    (clearing has probability 0), a clean cell ignites with probability
    1 - p_safe.  Obstacle cells contribute factor 1 and may never be
    contaminated.  Intended for enumeration on small instances.
    """
    y = _check_state(gmap, y)
    y_next = np.asarray(y_next, dtype=bool)
    if y_next.shape != y.shape:
        raise ValueError("hazard state dimensions differ")
    if np.any(y_next & gmap.occupancy):
        return 0.0
    if np.any(y & ~y_next):
        return 0.0
    ignite = ignition_grid(model, gmap, y)
    factors = np.where(y_next & ~y, ignite, np.where(~y_next, 1.0 - ignite, 1.0))
    return float(np.prod(factors[gmap.free_mask & ~y]))


def sample_episode(
    model: FireModel, gmap: GridMap, y_0: np.ndarray, horizon: int, rng: np.random.Generator
) -> np.ndarray:
    """Sample y_0..y_N as an (N+1, height, width) boolean stack."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    y = _check_state(gmap, y_0)
    states = np.empty((horizon + 1, gmap.height, gmap.width), dtype=bool)
    states[0] = y
    for t in range(horizon):
        y = _advance(model, gmap, y, rng.random((gmap.height, gmap.width)))
        states[t + 1] = y
    return states


def episode_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent, reproducible stream for one episode; the stream depends
    only on (master_seed, index), so enlarging an episode set keeps the
    existing episodes unchanged."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    )


def iter_episode_chunks(
    model: FireModel,
    gmap: GridMap,
    y_0: np.ndarray,
    horizon: int,
    episodes: int,
    master_seed: int,
    max_chunk_bytes: int = 64 << 20,
    first_index: int = 0,
):
    """Yield (start_index, states) blocks with states of shape
    (B, N+1, height, width); episode e always comes from episode_rng(seed, e)
    so neither chunking nor worker splits are visible in the sampled values.
    `first_index` offsets the episode indices for range workers."""
    y_0 = _check_state(gmap, y_0)
    h, w = gmap.height, gmap.width
    per_episode = max(1, horizon) * h * w * 9  # uniforms + states
    chunk = int(np.clip(max_chunk_bytes // per_episode, 1, max(1, episodes)))
    for start in range(0, episodes, chunk):
        size = min(chunk, episodes - start)
        states = np.empty((size, horizon + 1, h, w), dtype=bool)
        states[:, 0] = y_0
        if horizon > 0:
            uniforms = np.empty((size, horizon, h, w))
            for i in range(size):
                uniforms[i] = episode_rng(master_seed, first_index + start + i).random(
                    (horizon, h, w)
                )
            y = np.broadcast_to(y_0, (size, h, w)).copy()
            for t in range(horizon):
                y = _advance(model, gmap, y, uniforms[:, t])
                states[:, t + 1] = y
        yield first_index + start, states


def sample_episodes(
    model: FireModel,
    gmap: GridMap,
    y_0: np.ndarray,
    horizon: int,
    episodes: int,
    master_seed: int,
) -> np.ndarray:
    """All episodes as one (E, N+1, height, width) boolean array."""
    if episodes < 1:
        raise ValueError("episode count must be at least 1")
    out = np.empty((episodes, horizon + 1, gmap.height, gmap.width), dtype=bool)
    for start, states in iter_episode_chunks(model, gmap, y_0, horizon, episodes, master_seed):
        out[start : start + states.shape[0]] = states
    return out


class HazardEnumeration:
    """Full hazard state space over the free cells of a tiny grid.

    States are bitmasks over the row-major free-cell list; contamination of
    obstacles is impossible, which shrinks 2^(m*n) to 2^|free|.
    """

    def __init__(self, gmap: GridMap, limit: int = MAX_ENUM_FREE_CELLS):
        free = gmap.free_cells()
        if len(free) > limit:
            raise ResourceLimitError(
                f"{len(free)} free cells exceed the enumeration limit of {limit}"
            )
        self.gmap = gmap
        self.free = free
        self.index = {cell: i for i, cell in enumerate(free)}
        self.k = len(free)
        self.n_states = 1 << self.k
        self._direct_masks, self._diagonal_masks = self._neighbor_masks()

    def _neighbor_masks(self) -> tuple[list[int], list[int]]:
        direct, diagonal = [], []
        for col, row in self.free:
            d = g = 0
            for dc, dr in DIRECT_OFFSETS:
                i = self.index.get((col + dc, row + dr))
                if i is not None:
                    d |= 1 << i
            for dc, dr in DIAGONAL_OFFSETS:
                i = self.index.get((col + dc, row + dr))
                if i is not None:
                    g |= 1 << i
            direct.append(d)
            diagonal.append(g)
        return direct, diagonal

    def mask_of(self, y: np.ndarray) -> int:
        y = _check_state(self.gmap, y)
        mask = 0
        for i, (col, row) in enumerate(self.free):
            if y[row, col]:
                mask |= 1 << i
        return mask

    def matrix_of(self, mask: int) -> np.ndarray:
        y = np.zeros((self.gmap.height, self.gmap.width), dtype=bool)
        for i, (col, row) in enumerate(self.free):
            if mask >> i & 1:
                y[row, col] = True
        return y

    @cached_property
    def bit_vectors(self) -> np.ndarray:
        """(k, n_states) bool: bit_vectors[i, s] iff free cell i is
        contaminated in state s."""
        states = np.arange(self.n_states, dtype=np.int64)
        return (states[None, :] >> np.arange(self.k)[:, None] & 1).astype(bool)

    def ignition_probs(self, model: FireModel, mask: int) -> list[float]:
        """Per free cell, probability of fresh contamination from state mask
        (meaningless entries for already contaminated cells)."""
        out = []
        for i, (col, row) in enumerate(self.free):
            p = float(model.p_f[row, col])
            n_f = (mask & self._direct_masks[i]).bit_count()
            d_f = (mask & self._diagonal_masks[i]).bit_count()
            out.append(1.0 - (1.0 - p) ** n_f * (1.0 - p * DIAGONAL_SCALE) ** d_f)
        return out

    def transition_matrix(self, model: FireModel) -> sp.csr_matrix:
        """(n_states, n_states) kernel; row y, column y'."""
        rows: list[int] = []
        cols: list[int] = []
        data: list[float] = []
        for y in range(self.n_states):
            ignite = self.ignition_probs(model, y)
            entries = [(y, 1.0)]
            for i in range(self.k):
                if y >> i & 1:
                    continue
                p = ignite[i]
                if p == 0.0:
                    continue
                if p == 1.0:
                    entries = [(m | 1 << i, pr) for m, pr in entries]
                    continue
                entries = [
                    pair
                    for m, pr in entries
                    for pair in ((m, pr * (1.0 - p)), (m | 1 << i, pr * p))
                ]
            rows.extend(y for _ in entries)
            cols.extend(m for m, _ in entries)
            data.extend(pr for _, pr in entries)
        return sp.csr_matrix(
            (data, (rows, cols)), shape=(self.n_states, self.n_states)
        )

    def distribution_after(
        self, transition: sp.csr_matrix, y_0_mask: int, steps: int
    ) -> np.ndarray:
        """Row vector of Pr(y_t = .) after `steps` transitions from y_0."""
        dist = np.zeros(self.n_states)
        dist[y_0_mask] = 1.0
        for _ in range(steps):
            dist = dist @ transition
        return dist
