"""Safety-maximizing mission planning on 2-D grids with a spreading hazard.

Pipeline: parse a map and mission, compile the mission to a deterministic
automaton, sample hazard episodes, estimate conditional contamination
probabilities for all neighbor pairs, solve the decoupled backward DP,
and evaluate the resulting policy against replanning and coupling-
ignoring baselines.  An exact full-state DP validates everything on tiny
instances.
"""

from .automaton import (
    MissionAutomaton,
    MissionSpec,
    compile_mission,
    delta,
    initial_automaton_state,
    product_bfs_reachable,
    validate_partition,
)
from .baselines import (
    MissionReplanner,
    ReplannerState,
    UnconditionalTable,
    mission_replanner,
    naive_dp,
    replanner_step,
    unconditional_table,
)
from .errors import InputError, ResourceLimitError
from .grid import (
    CONTROLS,
    Coord,
    GridMap,
    MotionModel,
    manhattan,
    motion_step,
    neighbors,
    parse_map,
    serialize_map,
    shortest_path,
    valid_controls,
)
from .harness import (
    ComparisonReport,
    EvalReport,
    PolicyAgent,
    RolloutResult,
    compare,
    evaluate,
    rollout,
)
from .hazard import (
    FireModel,
    HazardEnumeration,
    initial_state,
    neighbor_counts,
    p_safe,
    sample_episode,
    sample_episodes,
    step,
    transition_prob,
)
from .oracle import FullSolution, reach_prob_of_policy, solve_full
from .planner import Policy, ValueTable, act, solve, value_at
from .scenario import Scenario, load_scenario, save_scenario
from .stp import StpTable, build_table, compact_kernel, estimate_pair, exact_pair

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
