"""Config-driven experiment runner.

One subcommand per experiment stage: the toy return table, reputation traces,
human dataset generation, envelope fitting, agent training, and evaluation.
Every command is deterministic given its config file and seed, and all
artifacts land under the configured output directory as plot-ready CSV/JSON.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import grid
from .alignment import AlignedEnv, AlignmentValue, recovery_steps, update_reputation
from .envelope import SpeedEnvelopeModel, dataset_fingerprint
from .junction import (DEFAULT_PROFILES, HumanProfile, JunctionEnv, ScenarioConfig,
                       generate_human_dataset, finish_time)
from .mdp import read_trajectory_csv, write_trajectory_csv
from .qlearn import TrainConfig, grid_discretizer, junction_discretizer, train
from .stats import align_test, violation_stats

DEFAULT_ALPHAS = (10.0, 5.0, 4.0, 2.0, 1.6, 1.2, 1.0)


class CliError(Exception):
    """User-facing failure with an actionable message."""


@dataclass
class RunConfig:
    experiment: str = "run"
    environment: str = "junction"        # junction | grid
    variant: str = "hava"                # hava | rb-only | dd-only
    tau: float = 1.0
    alpha: float = 0.1
    gamma: float = 0.99
    seed: int = 0
    out_dir: str = "runs/out"
    dataset_dir: str = "runs/humans"
    dd_model_path: str = "runs/dd_model.json"
    map_path: str | None = None
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    episodes_per_profile: int = 20
    profiles: tuple[HumanProfile, ...] = DEFAULT_PROFILES
    train: TrainConfig = field(default_factory=TrainConfig)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise CliError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
        return cls.from_dict(data, base=path.parent)

    @classmethod
    def from_dict(cls, data: dict, base: Path = Path(".")) -> "RunConfig":
        cfg = cls()
        known = {"experiment", "environment", "variant", "tau", "alpha", "gamma",
                 "seed", "out_dir", "dataset_dir", "dd_model_path", "map_path",
                 "scenario", "episodes_per_profile", "profiles", "train"}
        unknown = set(data) - known
        if unknown:
            raise CliError(f"unknown config keys: {sorted(unknown)}")
        for key in ("experiment", "environment", "variant", "seed",
                    "episodes_per_profile"):
            if key in data:
                setattr(cfg, key, data[key])
        for key in ("tau", "alpha", "gamma"):
            if key in data:
                setattr(cfg, key, float(data[key]))
        for key in ("out_dir", "dataset_dir", "dd_model_path", "map_path"):
            if key in data and data[key] is not None:
                setattr(cfg, key, str(base / data[key]))
        if "scenario" in data:
            cfg.scenario = ScenarioConfig.from_dict({**ScenarioConfig().to_dict(), **data["scenario"]})
        if "profiles" in data:
            cfg.profiles = tuple(HumanProfile(float(v), float(a)) for v, a in data["profiles"])
        if "train" in data:
            cfg.train = TrainConfig(**data["train"])
        if cfg.environment not in ("junction", "grid"):
            raise CliError(f"environment must be junction or grid, got {cfg.environment!r}")
        if cfg.variant not in ("hava", "rb-only", "dd-only"):
            raise CliError(f"variant must be hava, rb-only or dd-only, got {cfg.variant!r}")
        if cfg.alpha < 0:
            raise CliError(f"alpha must be non-negative, got {cfg.alpha}")
        if cfg.environment == "junction" and cfg.tau <= 0:
            raise CliError(f"tau must be positive for the junction, got {cfg.tau}")
        return cfg


def _parse_alphas(text: str) -> list[float]:
    values = [item for item in text.replace(" ", "").split(",") if item]
    if not values:
        raise argparse.ArgumentTypeError("at least one alpha value is required")
    return [float(v) for v in values]


# -- commands -------------------------------------------------------------------


def cmd_toy_table(args) -> int:
    rows = grid.reference_table(args.alphas, args.gamma)
    for row in rows:
        row["recovery_steps"] = recovery_steps(row["alpha"])
    header = f"{'alpha':>6} {'steps':>5} {'J(pi_r)':>9} {'J(pi_y)':>9} {'J(pi_g)':>9}  best"
    print(header)
    for row in rows:
        print(f"{row['alpha']:>6g} {row['recovery_steps']:>5d} "
              f"{row['pi_r']:>9.2f} {row['pi_y']:>9.2f} {row['pi_g']:>9.2f}  {row['best']}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["alpha,recovery_steps,J_pi_r,J_pi_y,J_pi_g,best"]
        for row in rows:
            lines.append(f"{row['alpha']:g},{row['recovery_steps']},"
                         f"{row['pi_r']!r},{row['pi_y']!r},{row['pi_g']!r},{row['best']}")
        (out / "table1.csv").write_text("\n".join(lines) + "\n")
        print(f"wrote {out / 'table1.csv'}")
    return 0


def cmd_reputation_trace(args) -> int:
    out_lines = ["alpha,step,w"]
    for alpha in args.alphas:
        w = 0.0
        print(f"alpha={alpha:g}:", end=" ")
        trace = []
        for step in range(1, args.steps + 1):
            w = update_reputation(w, 1.0, alpha)
            out_lines.append(f"{alpha:g},{step},{w!r}")
            trace.append(w)
            if w >= 1.0:
                break
        print(f"recovered in {len(trace)} steps: "
              + ", ".join(f"{v:.3f}" for v in trace[:6])
              + (" ..." if len(trace) > 6 else ""))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "reputation_trace.csv").write_text("\n".join(out_lines) + "\n")
        print(f"wrote {out / 'reputation_trace.csv'}")
    return 0


def cmd_gen_humans(args) -> int:
    cfg = RunConfig.from_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = Path(args.out) if args.out else Path(cfg.dataset_dir)
    traj_dir = out / "trajectories"
    traj_dir.mkdir(parents=True, exist_ok=True)
    dataset = generate_human_dataset(cfg.profiles, cfg.episodes_per_profile,
                                     cfg.seed, cfg.scenario, discount=cfg.gamma)
    fields = JunctionEnv(cfg.scenario).obs_fields
    paths = []
    for i, traj in enumerate(dataset):
        path = traj_dir / f"human_{i:04d}.csv"
        write_trajectory_csv(path, traj, fields)
        paths.append(path)
    finishes = [finish_time(t) for t in dataset]
    manifest = {
        "kind": "human-dataset",
        "seed": cfg.seed,
        "episodes_per_profile": cfg.episodes_per_profile,
        "profiles": [[p.max_speed_kmh, p.max_accel_kmh_per_tick] for p in cfg.profiles],
        "scenario": cfg.scenario.to_dict(),
        "n_trajectories": len(dataset),
        "finish_ticks": {"min": min(finishes), "max": max(finishes)},
        "dataset_hash": dataset_fingerprint(paths),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"wrote {len(dataset)} trajectories to {traj_dir}")
    print(f"finish times: {min(finishes)}..{max(finishes)} ticks")
    print(f"dataset hash: {manifest['dataset_hash'][:16]}...")
    return 0


def _load_dataset(dataset_dir: Path, gamma: float):
    manifest_path = dataset_dir / "manifest.json"
    if not manifest_path.exists():
        raise CliError(f"no human dataset at {dataset_dir} (expected manifest.json); "
                       f"run `hava gen-humans` first")
    manifest = json.loads(manifest_path.read_text())
    paths = sorted((dataset_dir / "trajectories").glob("*.csv"))
    if not paths:
        raise CliError(f"no trajectory CSVs under {dataset_dir / 'trajectories'}")
    return manifest, paths, [read_trajectory_csv(p, discount=gamma) for p in paths]


def cmd_fit_dd(args) -> int:
    cfg = RunConfig.from_file(args.config)
    manifest, paths, dataset = _load_dataset(Path(cfg.dataset_dir), cfg.gamma)
    current_hash = dataset_fingerprint(paths)
    model_path = Path(cfg.dd_model_path)
    if model_path.exists() and not args.force:
        existing = SpeedEnvelopeModel.load(model_path)
        if existing.dataset_hash != current_hash:
            raise CliError(
                f"{model_path} was fitted on a different dataset "
                f"({existing.dataset_hash[:12]}... != {current_hash[:12]}...); "
                f"pass --force to refit")
    scenario = ScenarioConfig.from_dict(manifest["scenario"])
    model = SpeedEnvelopeModel.fit(dataset, scenario, dataset_hash=current_hash)
    model_path.parent.mkdir(parents=True, exist_ok=True)
    model.save(model_path)
    empty = model.empty_bins()
    print(f"fitted envelope on {model.n_samples} samples over {len(model.bins)} bins")
    print(f"empty route bins (nearest-bin fallback applies): {len(empty)}")
    print(f"wrote {model_path}")
    return 0


def _build_env(cfg: RunConfig):
    """Wrapped environment + discretizer for the configured experiment."""
    if cfg.environment == "grid":
        world = grid.GridWorld.from_map_file(cfg.map_path) if cfg.map_path else grid.GridWorld.reference()
        rb, dd = world.rb, world.dd
        # discrete actions: tau is unused by the indicator rule
        if cfg.variant == "hava":
            av = AlignmentValue.hava(rb, dd, None, cfg.alpha)
        elif cfg.variant == "rb-only":
            av = AlignmentValue.rb_only(rb, None, cfg.alpha)
        else:
            av = AlignmentValue.dd_only(dd, None, cfg.alpha)
        return AlignedEnv(world, av), grid_discretizer(world, cfg.train.reputation_buckets)
    env = JunctionEnv(cfg.scenario)
    rb = env.rb
    dd = None
    if cfg.variant in ("hava", "dd-only"):
        model_path = Path(cfg.dd_model_path)
        if not model_path.exists():
            raise CliError(f"missing envelope model {model_path}; run `hava fit-dd` first")
        dd = SpeedEnvelopeModel.load(model_path).as_norm()
    if cfg.variant == "hava":
        av = AlignmentValue.hava(rb, dd, cfg.tau, cfg.alpha)
    elif cfg.variant == "rb-only":
        av = AlignmentValue.rb_only(rb, cfg.tau, cfg.alpha)
    else:
        av = AlignmentValue.dd_only(dd, cfg.tau, cfg.alpha)
    return AlignedEnv(env, av), junction_discretizer(cfg.scenario, cfg.train.reputation_buckets)


def cmd_train(args) -> int:
    cfg = RunConfig.from_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = Path(args.out) if args.out else Path(cfg.out_dir)
    env, discretize = _build_env(cfg)
    # the run-level discount and seed govern training
    tc = TrainConfig(**{**cfg.train.__dict__, "seed": cfg.seed, "gamma": cfg.gamma})
    result = train(env, discretize, tc)

    out.mkdir(parents=True, exist_ok=True)
    result.qtable.save(out / "qtable.json")
    curve_lines = ["episode,finish_time,return,mean_w"]
    for p in result.curve:
        curve_lines.append(f"{p.episode},{p.finish_time},{p.ret!r},{p.mean_w!r}")
    (out / "curves.csv").write_text("\n".join(curve_lines) + "\n")
    traj_dir = out / "trajectories"
    traj_dir.mkdir(exist_ok=True)
    for episode, traj in result.snapshots:
        write_trajectory_csv(traj_dir / f"snapshot_e{episode:06d}.csv", traj, env.obs_fields)
    finishes = [p.finish_time for p in result.curve[-100:]]
    manifest = {
        "kind": "training-run",
        "experiment": cfg.experiment,
        "environment": cfg.environment,
        "variant": cfg.variant,
        "alpha": cfg.alpha,
        "tau": cfg.tau,
        "seed": cfg.seed,
        "episodes": tc.episodes,
        "q_entries": len(result.qtable),
        "collided_episodes": sum(1 for p in result.curve if p.collided),
        "recent_finish_mean": float(np.mean(finishes)) if finishes else None,
        "snapshots": [e for e, _ in result.snapshots],
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"trained {tc.episodes} episodes ({len(result.qtable)} table entries)")
    if finishes:
        print(f"recent finish mean: {np.mean(finishes):.1f} ticks")
    print(f"wrote {out}/qtable.json, curves.csv, {len(result.snapshots)} snapshot trajectories")
    return 0


def cmd_eval(args) -> int:
    cfg = RunConfig.from_file(args.config)
    out = Path(args.out) if args.out else Path(cfg.out_dir)
    if cfg.environment == "grid":
        return _eval_grid(cfg, out)
    snap_paths = sorted((out / "trajectories").glob("snapshot_*.csv"))
    if not snap_paths:
        raise CliError(f"no snapshot trajectories under {out / 'trajectories'}; "
                       f"run `hava train` (with train.snapshot_window > 0) first")
    agent_trajs = [read_trajectory_csv(p, discount=cfg.gamma) for p in snap_paths]
    _manifest, _paths, humans = _load_dataset(Path(cfg.dataset_dir), cfg.gamma)

    ks_finish = align_test(agent_trajs, humans, feature="finish_time")
    ks_speed = align_test(agent_trajs, humans, feature="speed_profile")
    median_v, mean_v = violation_stats(agent_trajs, humans)
    report = {
        "experiment": cfg.experiment,
        "variant": cfg.variant,
        "alpha": cfg.alpha,
        "n_agent_trajectories": len(agent_trajs),
        "n_human_trajectories": len(humans),
        "agent_finish_ticks": [len(t.steps) for t in agent_trajs],
        "ks_finish_time": {"D": ks_finish.statistic, "p": ks_finish.p_value,
                           "aligned": ks_finish.aligned},
        "ks_speed_profile": {"D": ks_speed.statistic, "p": ks_speed.p_value,
                             "aligned": ks_speed.aligned},
        "violation_kmh": {"median": median_v, "mean": mean_v},
        "value_aligned": ks_finish.aligned,
    }
    (out / "eval_report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    verdict = "value aligned" if report["value_aligned"] else "not value aligned"
    print(f"KS finish-time: D={ks_finish.statistic:.3f} p={ks_finish.p_value:.4g} -> {verdict}")
    print(f"KS speed-profile: D={ks_speed.statistic:.3f} p={ks_speed.p_value:.4g}")
    print(f"envelope violation: median={median_v:.2f} km/h mean={mean_v:.2f} km/h")
    print(f"wrote {out / 'eval_report.json'}")
    return 0


def _eval_grid(cfg: RunConfig, out: Path) -> int:
    from .qlearn import QTable, greedy_rollout

    qtable_path = out / "qtable.json"
    if not qtable_path.exists():
        raise CliError(f"missing {qtable_path}; run `hava train` first")
    env, discretize = _build_env(cfg)
    qtable = QTable.load(qtable_path)
    traj = greedy_rollout(env, qtable, discretize, cfg.train.max_steps, cfg.gamma)
    world = env.env
    cells = [(int(s.obs[0]), int(s.obs[1])) for s in traj.steps[1:]]
    if traj.final_obs is not None:
        cells.append((int(traj.final_obs[0]), int(traj.final_obs[1])))
    crossed = any(c in world.lawn for c in cells)
    from .mdp import discounted_return
    report = {
        "experiment": cfg.experiment,
        "variant": cfg.variant,
        "alpha": cfg.alpha,
        "greedy_steps": len(traj.steps),
        "greedy_return": discounted_return(traj),
        "reached_goal": not traj.truncated,
        "crossed_lawn": crossed,
        "reference_returns": grid.evaluate_reference_policies(cfg.alpha, cfg.gamma),
    }
    (out / "eval_report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    print(f"greedy: {len(traj.steps)} steps, return {report['greedy_return']:.2f}, "
          f"lawn={'yes' if crossed else 'no'}")
    print(f"wrote {out / 'eval_report.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hava",
        description="Experiments for reputation-weighted value alignment in RL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toy-table", help="grid-world reference-policy return table")
    p.add_argument("--alphas", type=_parse_alphas, default=list(DEFAULT_ALPHAS))
    p.add_argument("--gamma", type=float, default=0.99)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_toy_table)

    p = sub.add_parser("reputation-trace", help="reputation recovery series per alpha")
    p.add_argument("--alphas", type=_parse_alphas, default=[10.0, 0.5, 0.1])
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_reputation_trace)

    p = sub.add_parser("gen-humans", help="generate the simulated human dataset")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen_humans)

    p = sub.add_parser("fit-dd", help="fit the speed envelope on the human dataset")
    p.add_argument("config")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_fit_dd)

    p = sub.add_parser("train", help="train a tabular agent per the config")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained run against the human dataset")
    p.add_argument("config")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
