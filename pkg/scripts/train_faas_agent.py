#!/usr/bin/env python3
"""Train the actor-critic tuner on cluster scenarios and evaluate it on the
wider test domain against the fixed-weight reference.

Training scenarios come from the narrow train domain (three presets, up to
180 nodes); evaluation samples the full test domain, including presets the
agent never saw. The coarse observation mask keeps only scenario features
that generalize across domains.
"""
import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from schedtune.agent import SacAgent, SacConfig, evaluate_policy, train_agent
from schedtune.optimizers import FixedOptimizer, run_tuning
from schedtune.tunenv import FaasTuningEnv, VectorEnv


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/faas_agent")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--env-steps", type=int, default=8_000)
    parser.add_argument("--num-envs", type=int, default=4)
    parser.add_argument("--duration", type=float, default=100.0)
    parser.add_argument("--mask", default="coarse",
                        choices=["full", "coarse", "none"])
    parser.add_argument("--hidden", type=int, nargs="+", default=[256, 256])
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--eval-scenarios", type=int, default=50)
    args = parser.parse_args()

    def env(mode):
        return FaasTuningEnv(mode=mode, mask_level=args.mask,
                             duration_s=args.duration)

    probe = env("train")
    agent = SacAgent(SacConfig(obs_dim=probe.observation_dim,
                               act_dim=probe.action_dim,
                               hidden=tuple(args.hidden), lr=args.lr,
                               batch_size=128, start_steps=1000),
                     seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    print(f"training for {args.env_steps} env steps "
          f"(mask={args.mask}, duration={args.duration}s) ...")
    train_agent(agent,
                VectorEnv([env("train") for _ in range(args.num_envs)]),
                total_env_steps=args.env_steps, seed=args.seed,
                checkpoint_path=out / "agent.ckpt", log_every=1000)

    seeds = [int(s) for s in np.random.default_rng(args.seed + 1).integers(
        2**31, size=args.eval_scenarios)]
    test_env = env("test")
    agent_eps = evaluate_policy(agent, test_env, seeds)
    fixed_eps = [run_tuning(FixedOptimizer(dim=test_env.action_dim),
                            test_env, seed=s) for s in seeds]
    agent_best = np.mean([e.best_score for e in agent_eps])
    fixed_best = np.mean([e.best_score for e in fixed_eps])
    wins = np.mean([a.best_score > f.best_score
                    for a, f in zip(agent_eps, fixed_eps)])
    print(f"test-domain mean best over {args.eval_scenarios} scenarios:")
    print(f"  agent         {agent_best:.4f}")
    print(f"  fixed weights {fixed_best:.4f}")
    print(f"  agent wins on {wins:.0%} of scenarios")
    print(f"checkpoint at {out / 'agent.ckpt'}")


if __name__ == "__main__":
    main()
