"""Command-line front end.

Subcommands: plan (estimate + solve, writes policy artifacts), eval
(rollout comparison of agents), render (SVG drawing), oracle (exact
ground-truth gap report on tiny instances), simulate (episode sampling
only).  Every command is deterministic given the scenario file; all seeds
live in it, with --seed as an explicit override.

Exit codes: 0 success, 2 usage error, 3 input error, 4 resource limit.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import baselines, cache, harness, render, stp
from .automaton import validate_partition
from .errors import InputError, ResourceLimitError
from .grid import Coord
from .oracle import reach_prob_of_policy, solve_full
from .planner import act, solve, value_at
from .scenario import Scenario, load_scenario
from .hazard import sample_episodes

log = logging.getLogger("hazardgrid")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--threads", type=int, default=1, help="worker processes for sampling")
    p.add_argument("--episodes", type=int, default=None, help="override episode count")
    p.add_argument("--trials", type=int, default=None, help="override trial count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hazardgrid")
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="estimate contamination tables and solve the DP")
    _add_common(p_plan)
    p_plan.set_defaults(func=cmd_plan)

    p_eval = sub.add_parser("eval", help="evaluate agents by repeated rollout")
    _add_common(p_eval)
    p_eval.add_argument(
        "--agents",
        default="stp,replanner",
        help="comma-separated subset of: stp, naive, replanner",
    )
    p_eval.set_defaults(func=cmd_eval)

    p_render = sub.add_parser("render", help="render the scenario to SVG")
    _add_common(p_render)
    p_render.add_argument("--trajectory", default=None, help="trajectory CSV (t,col,row)")
    p_render.add_argument("--policy", default=None, help="policy artifact for the planned path")
    p_render.set_defaults(func=cmd_render)

    p_oracle = sub.add_parser("oracle", help="exact ground-truth gap report (tiny grids)")
    _add_common(p_oracle)
    p_oracle.set_defaults(func=cmd_oracle)

    p_sim = sub.add_parser("simulate", help="sample hazard episodes only")
    _add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def _scenario(args) -> Scenario:
    scenario = load_scenario(args.scenario)
    if args.episodes is not None:
        scenario.episodes = args.episodes
    if args.trials is not None:
        scenario.trials = args.trials
    return scenario


def _setup(scenario: Scenario):
    gmap = scenario.load_map()
    aut = scenario.automaton(gmap)
    report = validate_partition(aut, gmap)
    for cell, labels in report.overlaps:
        log.warning("cell %s carries overlapping labels %s; precedence applies", cell, labels)
    return gmap, aut, scenario.fire_model(gmap), scenario.initial_hazard(gmap), scenario.motion()


def _stp_table(scenario: Scenario, gmap, model, y_0, out_dir: Path, seed: int, threads: int):
    key = cache.content_key(
        {
            "kind": "stp_table",
            "map": scenario.map_text(),
            "model": model.digest(),
            "horizon": scenario.horizon,
            "episodes": scenario.episodes,
            "seed": seed,
        }
    )
    path = cache.cache_dir(out_dir / "cache") / f"stp_{key[:24]}.bin"
    if path.exists():
        log.info("stp table cache hit, episode sampling skipped (%s)", path)
        return cache.load_table(path)[1], key, True
    table = stp.build_table(
        model, gmap, y_0, scenario.horizon, scenario.episodes, seed, workers=threads
    )
    cache.save_table(path, table, meta={"key": key})
    log.info("stp table cache miss, sampled %d episodes (%s)", scenario.episodes, path)
    return table, key, False


def cmd_plan(args) -> int:
    scenario = _scenario(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else scenario.seed_episodes
    gmap, aut, model, y_0, motion = _setup(scenario)

    table, key, cache_hit = _stp_table(
        scenario, gmap, model, y_0, out_dir, seed, args.threads
    )
    values, policy = solve(gmap, aut, motion, table, scenario.horizon)
    cache.save_policy(out_dir / "policy_stp.bin", policy, meta={"variant": "stp", "key": key})

    naive_table = baselines.unconditional_table_streamed(
        model, gmap, y_0, scenario.horizon, scenario.episodes, seed
    )
    naive_values, naive_policy = solve(gmap, aut, motion, naive_table, scenario.horizon)
    cache.save_policy(
        out_dir / "policy_naive.bin", naive_policy, meta={"variant": "naive", "key": key}
    )

    v0 = value_at(values, 0, aut.initial, gmap.start)
    v0_naive = value_at(naive_values, 0, aut.initial, gmap.start)
    summary = {
        "value_at_start": v0,
        "value_at_start_naive": v0_naive,
        "cache_hit": cache_hit,
        "episodes": scenario.episodes,
        "horizon": scenario.horizon,
        "seed": seed,
        "table_key": key,
    }
    (out_dir / "plan_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"value_at_start {v0!r}")
    return 0


def _build_agents(names: list[str], gmap, aut, scenario: Scenario, out_dir: Path):
    agents = []
    for name in names:
        if name == "replanner":
            agents.append(
                (name, baselines.mission_replanner(gmap, aut, scenario.visibility_radius))
            )
        elif name in ("stp", "naive"):
            path = out_dir / f"policy_{name}.bin"
            if not path.exists():
                raise InputError(f"missing policy artifact {path}; run plan first")
            _, _, policy = cache.load_policy(path)
            if policy.horizon < scenario.horizon:
                raise InputError(
                    f"policy artifact {path} covers horizon {policy.horizon} "
                    f"< scenario horizon {scenario.horizon}"
                )
            agents.append((name, harness.PolicyAgent(policy)))
        else:
            raise InputError(f"unknown agent {name!r}")
    return agents


def _write_trial_csv(path: Path, per_trial: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("trial,seed,success,cause,end_time\n")
        for row in per_trial:
            fh.write(
                f"{row['trial']},{row['seed']},{int(row['success'])},"
                f"{row['cause']},{row['end_time']}\n"
            )


def _write_trajectory(path: Path, trajectory: list[Coord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,col,row\n")
        for t, (col, row) in enumerate(trajectory):
            fh.write(f"{t},{col},{row}\n")


def cmd_eval(args) -> int:
    if args.trials is not None and args.trials < 1:
        raise UsageError("--trials must be at least 1")
    scenario = _scenario(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else scenario.seed_eval
    gmap, aut, model, y_0, motion = _setup(scenario)

    names = [n.strip() for n in args.agents.split(",") if n.strip()]
    if not names:
        raise UsageError("--agents must name at least one agent")
    agents = _build_agents(names, gmap, aut, scenario, out_dir)

    if len(agents) == 1:
        name, agent = agents[0]
        report = harness.evaluate(
            agent, gmap, aut, motion, model, y_0, scenario.horizon, scenario.trials, seed
        )
        summary = {"seed": seed, "trials": scenario.trials, "agents": {name: report.to_dict()}}
        reports = {name: report}
    else:
        comparison = harness.compare(
            agents, gmap, aut, motion, model, y_0, scenario.horizon, scenario.trials, seed
        )
        summary = {"seed": seed, "trials": scenario.trials, **comparison.to_dict()}
        reports = comparison.reports

    for name, report in reports.items():
        _write_trial_csv(out_dir / f"trials_{name}.csv", report.per_trial)
    for name, agent in agents:
        first = harness.rollout(
            agent,
            gmap,
            aut,
            motion,
            model,
            y_0,
            scenario.horizon,
            np.random.SeedSequence(entropy=seed, spawn_key=(0,)),
        )
        _write_trajectory(out_dir / f"trajectory_{name}.csv", first.trajectory)
    (out_dir / "eval_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for name in reports:
        rep = reports[name]
        print(
            f"{name}: rate {rep.rate:.4f} ({rep.successes}/{rep.trials}) "
            f"ci95 [{rep.ci95[0]:.4f}, {rep.ci95[1]:.4f}]"
        )
    return 0


def _read_trajectory(path: Path) -> list[Coord]:
    if not path.exists():
        raise InputError(f"trajectory file not found: {path}")
    cells: list[Coord] = []
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "t,col,row":
        raise InputError(f"malformed trajectory log {path}: expected header t,col,row")
    for line in lines[1:]:
        try:
            _, col, row = line.split(",")
            cells.append((int(col), int(row)))
        except ValueError as exc:
            raise InputError(f"malformed trajectory row {line!r}") from exc
    return cells


def cmd_render(args) -> int:
    scenario = _scenario(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    gmap, aut, model, y_0, _ = _setup(scenario)

    shade_episodes = min(scenario.episodes, 256)
    episodes = sample_episodes(
        model, gmap, y_0, scenario.horizon, shade_episodes, scenario.seed_episodes
    )
    shading = render.first_contamination_quantile(episodes)

    solid = _read_trajectory(Path(args.trajectory)) if args.trajectory else []
    dotted = []
    if args.policy:
        policy_path = Path(args.policy)
        if not policy_path.exists():
            raise InputError(f"policy artifact not found: {policy_path}")
        _, _, policy = cache.load_policy(policy_path)
        dotted = render.planned_path(policy, gmap, aut, scenario.horizon)
        if solid:
            dotted = dotted[len(solid) - 1 :] if len(solid) <= len(dotted) else []

    svg = render.render_svg(
        gmap,
        solid_path=solid,
        dotted_path=dotted,
        shading=shading,
        shading_horizon=scenario.horizon,
    )
    out_path = out_dir / "render.svg"
    out_path.write_text(svg, encoding="utf-8")
    print(str(out_path))
    return 0


def cmd_oracle(args) -> int:
    scenario = _scenario(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else scenario.seed_episodes
    gmap, aut, model, y_0, motion = _setup(scenario)

    full = solve_full(gmap, aut, motion, model, y_0, scenario.horizon)

    table = stp.build_table(
        model, gmap, y_0, scenario.horizon, scenario.episodes, seed, workers=args.threads
    )
    values, policy = solve(gmap, aut, motion, table, scenario.horizon)
    naive_table = baselines.unconditional_table_streamed(
        model, gmap, y_0, scenario.horizon, scenario.episodes, seed
    )
    naive_values, naive_policy = solve(gmap, aut, motion, naive_table, scenario.horizon)

    def table_policy(p):
        return lambda t, q, x, _mask: act(p, t, q, x)

    rows = {
        "r_star": full.r_star,
        "value_stp": value_at(values, 0, aut.initial, gmap.start),
        "value_naive": value_at(naive_values, 0, aut.initial, gmap.start),
        "exact_eval_full": reach_prob_of_policy(
            full.policy_fn(), gmap, aut, motion, model, y_0, scenario.horizon
        ),
        "exact_eval_stp": reach_prob_of_policy(
            table_policy(policy), gmap, aut, motion, model, y_0, scenario.horizon
        ),
        "exact_eval_naive": reach_prob_of_policy(
            table_policy(naive_policy), gmap, aut, motion, model, y_0, scenario.horizon
        ),
    }
    with open(out_dir / "oracle_gaps.csv", "w", encoding="utf-8") as fh:
        fh.write("metric,value\n")
        for metric, value in rows.items():
            fh.write(f"{metric},{value!r}\n")
    for metric, value in rows.items():
        print(f"{metric} {value!r}")
    return 0


def cmd_simulate(args) -> int:
    scenario = _scenario(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else scenario.seed_episodes
    gmap, _, model, y_0, _ = _setup(scenario)
    episodes = sample_episodes(model, gmap, y_0, scenario.horizon, scenario.episodes, seed)
    path = out_dir / "episodes.bin"
    cache.save_episodes(
        path,
        episodes,
        meta={"master_seed": seed, "model_hash": model.digest(), "horizon": scenario.horizon},
    )
    print(str(path))
    return 0


class UsageError(Exception):
    pass


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits 2
        return 2
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
