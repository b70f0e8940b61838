"""Command line entry points.

Subcommands:
  simulate     run one benchmark with the fixed weights, dump run records
  tune         tune weights on sampled scenarios with a baseline method
  train-agent  train the soft actor-critic tuner and save a checkpoint
  eval         tune scenarios with a trained agent checkpoint
  compare      aggregate a trials table into per-method summaries
  report       render summary, SVG chart and markdown from a trials table

All scenario seeds derive from ``--seed``, so different methods invoked with
the same seed tune exactly the same scenarios.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .agent import SacAgent, SacConfig, evaluate_policy, train_agent
from .cluster import build_cluster
from .config import ExperimentConfig, config_from_dict, load_config
from .errors import ConfigError, SchedTuneError
from .optimizers import OPTIMIZERS, make_optimizer, run_tuning
from .report import (
    CSV_SCHEMA_VERSION,
    read_trials_csv,
    render_report_md,
    render_score_chart,
    summarize_trials,
    trial_rows,
    write_summary_csv,
    write_trials_csv,
)
from .scheduler import FIXED_WEIGHTS
from .simengine import run_benchmark
from .synthfuncs import SyntheticTuningEnv
from .tunenv import (
    FaasTuningEnv,
    VectorEnv,
    default_space_set,
    sample_scenario,
)

TUNE_METHODS = tuple(sorted(OPTIMIZERS)) + ("agent",)

RUNRECORD_FIELDS = ("schema_version", "experiment", "scenario_seed",
                    "scenario_digest", "preset", "topology", "num_nodes",
                    "function", "requests_per_second", "n_total", "n_success",
                    "fetch_mean_s", "wait_mean_s", "benchmark_score")


def make_env(config: ExperimentConfig):
    if config.env_kind == "synthetic":
        return SyntheticTuningEnv(config.synth_function, mode=config.mode,
                                  mask_level=config.mask_level,
                                  n_steps=config.n_steps)
    return FaasTuningEnv(mode=config.mode, mask_level=config.mask_level,
                         n_steps=config.n_steps, duration_s=config.duration_s,
                         data_dir=config.data_dir)


def scenario_seeds(seed: int, count: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0] % (2**63 - 1))
            for c in children]


def _tune_worker(payload: dict) -> list[dict]:
    config = config_from_dict(payload["config"])
    method = payload["method"]
    scenario_seed = payload["scenario_seed"]
    env = make_env(config)
    if method == "agent":
        agent = SacAgent.load(payload["checkpoint"])
        episode = evaluate_policy(agent, env, [scenario_seed])[0]
    else:
        optimizer = make_optimizer(method, dim=env.action_dim)
        episode = run_tuning(optimizer, env, seed=scenario_seed)
    names = [v.name for v in env.space.actions]
    return trial_rows(config.name, method, scenario_seed, episode, names)


def run_tune(config: ExperimentConfig, method: str, seed: int, out_dir: Path,
             checkpoint=None, jobs: int = 1) -> Path:
    if method not in TUNE_METHODS:
        raise ConfigError(
            f"unknown method {method!r}, expected one of {list(TUNE_METHODS)}")
    if method == "agent" and checkpoint is None:
        raise ConfigError("method 'agent' requires --checkpoint")
    out_dir.mkdir(parents=True, exist_ok=True)
    payloads = [{
        "config": config.to_dict(),
        "method": method,
        "scenario_seed": s,
        "checkpoint": None if checkpoint is None else str(checkpoint),
    } for s in scenario_seeds(seed, config.n_scenarios)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            all_rows = list(pool.map(_tune_worker, payloads))
    else:
        all_rows = [_tune_worker(p) for p in payloads]
    env = make_env(config)
    names = [v.name for v in env.space.actions]
    path = out_dir / "trials.csv"
    write_trials_csv(path, [row for rows in all_rows for row in rows], names)
    return path


# -- subcommand handlers -----------------------------------------------------

def cmd_simulate(args) -> int:
    config = _config_of(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    scenario = sample_scenario(default_space_set(), config.mode, rng,
                               duration_s=config.duration_s,
                               data_dir=config.data_dir)
    cluster = build_cluster(scenario.cluster_spec, config.data_dir)
    result = run_benchmark(cluster, scenario.workload, FIXED_WEIGHTS,
                           scenario.options)
    path = out_dir / "runrecords.csv"
    new_file = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=RUNRECORD_FIELDS)
        if new_file:
            writer.writeheader()
        rps = dict((fn.name, r) for fn, r in scenario.workload.functions)
        for name, metrics in sorted(result.metrics.per_function.items()):
            writer.writerow({
                "schema_version": CSV_SCHEMA_VERSION,
                "experiment": config.name,
                "scenario_seed": args.seed,
                "scenario_digest": scenario.digest(),
                "preset": scenario.cluster_spec.preset,
                "topology": scenario.cluster_spec.topology_kind,
                "num_nodes": scenario.cluster_spec.total_nodes,
                "function": name,
                "requests_per_second": f"{rps[name]:.6f}",
                "n_total": metrics.n_total,
                "n_success": metrics.n_success,
                "fetch_mean_s": f"{metrics.mu_fet_s:.6f}",
                "wait_mean_s": f"{metrics.mu_wait_s:.6f}",
                "benchmark_score": f"{result.score:.6f}",
            })
    print(f"scenario {scenario.digest()} on {scenario.cluster_spec.preset} "
          f"({scenario.cluster_spec.total_nodes} nodes, "
          f"{scenario.cluster_spec.topology_kind}): score {result.score:.4f}")
    print(f"run records written to {path}")
    return 0


def cmd_tune(args) -> int:
    config = _config_of(args)
    path = run_tune(config, args.method, args.seed, Path(args.out),
                    checkpoint=args.checkpoint, jobs=args.jobs)
    print(f"tuned {config.n_scenarios} scenarios with method "
          f"{args.method!r}; trials appended to {path}")
    return 0


def cmd_train_agent(args) -> int:
    config = _config_of(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    probe = make_env(config)
    sac_config = SacConfig(
        obs_dim=probe.observation_dim,
        act_dim=probe.action_dim,
        hidden=config.hidden,
        gamma=config.gamma,
        tau=config.tau,
        lr=config.lr,
        batch_size=config.batch_size,
        replay_capacity=config.replay_capacity,
        start_steps=config.start_steps,
    )
    agent = SacAgent(sac_config, seed=args.seed)
    vec = VectorEnv([make_env(config) for _ in range(config.num_envs)])
    eval_config = ExperimentConfig(**{**config.to_dict(), "mode": "test"})
    checkpoint = out_dir / "agent.ckpt"
    result = train_agent(
        agent, vec, total_env_steps=config.total_env_steps, seed=args.seed,
        eval_env=make_env(eval_config) if config.eval_every else None,
        eval_seeds=scenario_seeds(args.seed + 1, config.n_eval_seeds),
        eval_every=config.eval_every,
        checkpoint_path=checkpoint,
        log_every=config.log_every,
    )
    log_path = out_dir / "train_log.csv"
    if result.history:
        with open(log_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(result.history[-1]))
            writer.writeheader()
            for entry in result.history:
                writer.writerow(entry)
    print(f"trained for {agent.env_steps} environment steps; "
          f"checkpoint at {checkpoint}")
    return 0


def cmd_eval(args) -> int:
    config = _config_of(args)
    path = run_tune(config, "agent", args.seed, Path(args.out),
                    checkpoint=args.checkpoint, jobs=args.jobs)
    print(f"evaluated checkpoint on {config.n_scenarios} scenarios; "
          f"trials appended to {path}")
    return 0


def cmd_compare(args) -> int:
    out_dir = Path(args.out)
    rows = read_trials_csv(out_dir / "trials.csv")
    summaries = summarize_trials(rows)
    write_summary_csv(out_dir / "summary.csv", summaries)
    width = max(len(s.method) for s in summaries)
    print(f"{'method'.ljust(width)}  scenarios  mean initial  mean best  "
          f"improvement  win rate")
    for s in summaries:
        print(f"{s.method.ljust(width)}  {s.n_scenarios:9d}  "
              f"{s.mean_reference:12.4f}  {s.mean_best:9.4f}  "
              f"{s.mean_improvement:+11.4f}  {s.win_rate:8.0%}")
    print(f"summary written to {out_dir / 'summary.csv'}")
    return 0


def cmd_report(args) -> int:
    config = _config_of(args) if args.config else None
    out_dir = Path(args.out)
    rows = read_trials_csv(out_dir / "trials.csv")
    summaries = summarize_trials(rows)
    write_summary_csv(out_dir / "summary.csv", summaries)
    (out_dir / "scores.svg").write_text(render_score_chart(summaries),
                                        encoding="utf-8")
    markdown = render_report_md(
        summaries, chart_filename="scores.svg",
        config_echo=None if config is None else config.to_dict())
    (out_dir / "report.md").write_text(markdown, encoding="utf-8")
    print(f"report written to {out_dir / 'report.md'}")
    return 0


def _config_of(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return ExperimentConfig()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schedtune",
        description="Benchmark-driven tuning of scheduler scoring weights.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, jobs=False, method=False, checkpoint=False):
        p.add_argument("--config", help="path to a JSON experiment config")
        p.add_argument("--seed", type=int, default=0,
                       help="master seed; scenario seeds derive from it")
        p.add_argument("--out", required=True,
                       help="output directory for artifacts")
        if method:
            p.add_argument("--method", default="random",
                           choices=list(TUNE_METHODS),
                           help="tuning method")
        if checkpoint:
            p.add_argument("--checkpoint",
                           help="path to a trained agent checkpoint")
        if jobs:
            p.add_argument("--jobs", type=int, default=1,
                           help="worker processes for scenario fan-out")

    p = sub.add_parser("simulate", help="run one benchmark with fixed weights")
    common(p)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("tune", help="tune scenarios with a baseline method")
    common(p, jobs=True, method=True, checkpoint=True)
    p.set_defaults(handler=cmd_tune)

    p = sub.add_parser("train-agent", help="train the actor-critic tuner")
    common(p)
    p.set_defaults(handler=cmd_train_agent)

    p = sub.add_parser("eval", help="tune scenarios with a trained agent")
    common(p, jobs=True, checkpoint=True)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("compare", help="summarize a trials table")
    common(p)
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("report", help="render summary, chart and markdown")
    common(p)
    p.set_defaults(handler=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except SchedTuneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
