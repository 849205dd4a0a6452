"""Monte Carlo rollout evaluation.

Simulates hazard and agent jointly with a fixed within-step order: the
robot moves, the hazard advances, then the automaton fires on the
post-move, post-spread pair.  Hazard and robot randomness come from
independently derived streams, so paired comparisons expose every agent
to identical hazard realizations per trial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .automaton import MissionAutomaton, delta, initial_automaton_state
from .grid import CONTROLS, Coord, GridMap, MotionModel, STAY, destination, motion_step
from .hazard import FireModel, sample_episode
from .planner import Policy, act

COMPLETED = "completed"
CONTAMINATED = "contaminated"
HORIZON_EXHAUSTED = "horizon_exhausted"
STALLED = "stalled"
CAUSES = (COMPLETED, CONTAMINATED, HORIZON_EXHAUSTED, STALLED)


class PolicyAgent:
    """Executes a precomputed time-indexed policy; observes nothing."""

    visibility_radius: int | None = None

    def __init__(self, policy: Policy):
        self.policy = policy

    def reset(self) -> None:
        pass

    def observe(self, x: Coord, q: int, t: int, visible: frozenset[Coord]) -> str:
        return act(self.policy, t, q, x)


@dataclass
class RolloutResult:
    success: bool
    end_time: int
    cause: str
    trajectory: list[Coord]
    automaton_trace: list[int]


def _visible_contamination(
    gmap: GridMap, y: np.ndarray, x: Coord, radius: int | None
) -> frozenset[Coord]:
    if radius is None:
        return frozenset()
    col, row = x
    cells = []
    for dc in range(-radius, radius + 1):
        span = radius - abs(dc)
        for dr in range(-span, span + 1):
            c, r = col + dc, row + dr
            if 0 <= c < gmap.width and 0 <= r < gmap.height and y[r, c]:
                cells.append((c, r))
    return frozenset(cells)


def rollout_against_episode(
    agent,
    gmap: GridMap,
    aut: MissionAutomaton,
    motion: MotionModel,
    episode: np.ndarray,
    robot_rng: np.random.Generator,
) -> RolloutResult:
    """Run one agent against a fixed hazard episode."""
    horizon = episode.shape[0] - 1
    x = gmap.start
    q = initial_automaton_state(aut, gmap, x, episode[0])
    trajectory = [x]
    trace = [q]
    if q in aut.finals:
        return RolloutResult(True, 0, COMPLETED, trajectory, trace)
    if q == aut.hazard:
        return RolloutResult(False, 0, CONTAMINATED, trajectory, trace)
    if hasattr(agent, "reset"):
        agent.reset()
    radius = getattr(agent, "visibility_radius", None)
    for t in range(horizon):
        visible = _visible_contamination(gmap, episode[t], x, radius)
        u = agent.observe(x, q, t, visible)
        if u not in CONTROLS or (u != STAY and not gmap.is_free(destination(x, u))):
            return RolloutResult(False, t, STALLED, trajectory, trace)
        x = motion_step(motion, gmap, x, u, robot_rng)
        y_next = episode[t + 1]
        q = delta(aut, q, x, bool(y_next[x[1], x[0]]), gmap)
        trajectory.append(x)
        trace.append(q)
        if q in aut.finals:
            return RolloutResult(True, t + 1, COMPLETED, trajectory, trace)
        if q == aut.hazard:
            return RolloutResult(False, t + 1, CONTAMINATED, trajectory, trace)
    return RolloutResult(False, horizon, HORIZON_EXHAUSTED, trajectory, trace)


def rollout(
    agent,
    gmap: GridMap,
    aut: MissionAutomaton,
    motion: MotionModel,
    model: FireModel,
    y_0: np.ndarray,
    horizon: int,
    seed,
) -> RolloutResult:
    """Sample a hazard episode and run the agent against it; deterministic
    given the seed (an int or a SeedSequence)."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    hazard_ss, robot_ss = ss.spawn(2)
    episode = sample_episode(model, gmap, y_0, horizon, np.random.default_rng(hazard_ss))
    return rollout_against_episode(
        agent, gmap, aut, motion, episode, np.random.default_rng(robot_ss)
    )


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054):
    """95% Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4 * trials * trials))
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass
class EvalReport:
    trials: int
    successes: int
    rate: float
    ci95: tuple[float, float]
    causes: dict[str, int]
    per_trial: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "successes": self.successes,
            "rate": self.rate,
            "ci95": list(self.ci95),
            "causes": dict(sorted(self.causes.items())),
        }


def _aggregate(results: list[RolloutResult]) -> EvalReport:
    successes = sum(1 for r in results if r.success)
    causes = {cause: 0 for cause in CAUSES}
    for r in results:
        causes[r.cause] += 1
    per_trial = [
        {
            "trial": i,
            "seed": i,
            "success": r.success,
            "cause": r.cause,
            "end_time": r.end_time,
        }
        for i, r in enumerate(results)
    ]
    n = len(results)
    return EvalReport(
        trials=n,
        successes=successes,
        rate=successes / n,
        ci95=wilson_interval(successes, n),
        causes={c: k for c, k in causes.items() if k},
        per_trial=per_trial,
    )


def evaluate(
    agent,
    gmap: GridMap,
    aut: MissionAutomaton,
    motion: MotionModel,
    model: FireModel,
    y_0: np.ndarray,
    horizon: int,
    trials: int,
    master_seed: int,
) -> EvalReport:
    """Independent rollouts with per-trial derived seeds."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    results = [
        rollout(
            agent,
            gmap,
            aut,
            motion,
            model,
            y_0,
            horizon,
            np.random.SeedSequence(entropy=master_seed, spawn_key=(i,)),
        )
        for i in range(trials)
    ]
    return _aggregate(results)


@dataclass
class ComparisonReport:
    """Paired evaluation of several agents on identical hazard streams."""

    names: list[str]
    reports: dict[str, EvalReport]
    outcomes: np.ndarray  # (trials, n_agents) bool

    def mcnemar(self, a: str, b: str) -> tuple[int, int]:
        """(#trials a succeeded and b failed, #trials b succeeded and a failed)."""
        i, j = self.names.index(a), self.names.index(b)
        oa, ob = self.outcomes[:, i], self.outcomes[:, j]
        return int(np.count_nonzero(oa & ~ob)), int(np.count_nonzero(ob & ~oa))

    def sign_test_pvalue(self, a: str, b: str) -> float:
        """One-sided paired sign test that agent `a` beats agent `b`."""
        n_a, n_b = self.mcnemar(a, b)
        if n_a + n_b == 0:
            return 1.0
        return float(binomtest(n_a, n_a + n_b, 0.5, alternative="greater").pvalue)

    def to_dict(self) -> dict:
        out = {
            "agents": {name: self.reports[name].to_dict() for name in self.names},
            "pairs": {},
        }
        for i, a in enumerate(self.names):
            for b in self.names[i + 1 :]:
                n_a, n_b = self.mcnemar(a, b)
                out["pairs"][f"{a}_vs_{b}"] = {
                    "wins_first": n_a,
                    "wins_second": n_b,
                    "sign_test_p_first_better": self.sign_test_pvalue(a, b),
                }
        return out


def compare(
    agents: list[tuple[str, object]],
    gmap: GridMap,
    aut: MissionAutomaton,
    motion: MotionModel,
    model: FireModel,
    y_0: np.ndarray,
    horizon: int,
    trials: int,
    master_seed: int,
) -> ComparisonReport:
    """Evaluate all agents against the same per-trial hazard episodes.

    The seed derivation matches evaluate(), so a single agent's outcomes
    here are identical to its standalone evaluation.
    """
    if len(agents) < 2:
        raise ValueError("compare needs at least two agents")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    names = [name for name, _ in agents]
    if len(set(names)) != len(names):
        raise ValueError("agent names must be unique")
    results: dict[str, list[RolloutResult]] = {name: [] for name in names}
    outcomes = np.zeros((trials, len(agents)), dtype=bool)
    for i in range(trials):
        ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(i,))
        hazard_ss, robot_ss = ss.spawn(2)
        episode = sample_episode(
            model, gmap, y_0, horizon, np.random.default_rng(hazard_ss)
        )
        for a, (name, agent) in enumerate(agents):
            res = rollout_against_episode(
                agent, gmap, aut, motion, episode, np.random.default_rng(robot_ss)
            )
            results[name].append(res)
            outcomes[i, a] = res.success
    reports = {name: _aggregate(results[name]) for name in names}
    return ComparisonReport(names=names, reports=reports, outcomes=outcomes)
