"""Scenario configuration: one JSON document drives the whole pipeline.

All randomness seeds live in the scenario file, so planning and
evaluation are reproducible from a single artifact.  Map paths are
resolved relative to the scenario file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .automaton import MissionAutomaton, MissionSpec, compile_mission
from .errors import InputError
from .grid import GridMap, MotionModel, parse_map
from .hazard import FireModel, initial_state


@dataclass
class Scenario:
    map_path: str
    mission: list[list[str]]
    p_f: float = 0.2
    p_f_overrides: list[dict] = field(default_factory=list)
    horizon: int = 40
    episodes: int = 2000
    trials: int = 1000
    seed_episodes: int = 1
    seed_eval: int = 2
    slip: float = 0.0
    visibility_radius: int = 2
    base_dir: Path | None = None

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise InputError("horizon must be at least 1")
        if self.episodes < 1:
            raise InputError("episode count must be at least 1")
        if self.trials < 1:
            raise InputError("trials must be at least 1")
        if not self.mission:
            raise InputError("mission must have at least one stage")

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "Scenario":
        fire = data.get("fire", {})
        seeds = data.get("seeds", {})
        motion = data.get("motion", {})
        agents = data.get("agents", {})
        replanner = agents.get("replanner", {})
        try:
            return cls(
                map_path=data["map"],
                mission=[sorted(str(lb) for lb in stage) for stage in data["mission"]],
                p_f=float(fire.get("p_f", 0.2)),
                p_f_overrides=[
                    {"cell": [int(o["cell"][0]), int(o["cell"][1])], "p_f": float(o["p_f"])}
                    for o in fire.get("overrides", [])
                ],
                horizon=int(data.get("horizon", 40)),
                episodes=int(data.get("episodes", 2000)),
                trials=int(data.get("trials", 1000)),
                seed_episodes=int(seeds.get("episodes", 1)),
                seed_eval=int(seeds.get("eval", 2)),
                slip=float(motion.get("slip", 0.0)),
                visibility_radius=int(replanner.get("visibility_radius", 2)),
                base_dir=base_dir,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed scenario: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "map": self.map_path,
            "mission": [sorted(stage) for stage in self.mission],
            "fire": {"p_f": self.p_f, "overrides": self.p_f_overrides},
            "horizon": self.horizon,
            "episodes": self.episodes,
            "trials": self.trials,
            "seeds": {"episodes": self.seed_episodes, "eval": self.seed_eval},
            "motion": {"slip": self.slip},
            "agents": {"replanner": {"visibility_radius": self.visibility_radius}},
        }

    def resolved_map_path(self) -> Path:
        path = Path(self.map_path)
        if not path.is_absolute() and self.base_dir is not None:
            path = self.base_dir / path
        return path

    def load_map(self) -> GridMap:
        path = self.resolved_map_path()
        if not path.exists():
            raise InputError(f"map file not found: {path}")
        return parse_map(path.read_text(encoding="utf-8"))

    def map_text(self) -> str:
        path = self.resolved_map_path()
        if not path.exists():
            raise InputError(f"map file not found: {path}")
        return path.read_text(encoding="utf-8")

    def mission_spec(self) -> MissionSpec:
        return MissionSpec.from_lists(self.mission)

    def automaton(self, gmap: GridMap) -> MissionAutomaton:
        return compile_mission(self.mission_spec(), gmap)

    def fire_model(self, gmap: GridMap) -> FireModel:
        model = FireModel.uniform(gmap, self.p_f)
        if self.p_f_overrides:
            overrides = {
                (o["cell"][0], o["cell"][1]): o["p_f"] for o in self.p_f_overrides
            }
            model = model.with_overrides(overrides)
        return model

    def initial_hazard(self, gmap: GridMap) -> np.ndarray:
        return initial_state(gmap)

    def motion(self) -> MotionModel:
        return MotionModel(slip=self.slip)


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise InputError(f"scenario file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"scenario is not valid JSON: {exc}") from exc
    return Scenario.from_dict(data, base_dir=path.parent)


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(
        json.dumps(scenario.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
