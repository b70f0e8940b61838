#!/usr/bin/env python3
"""Train the actor-critic tuner on a 2-D landscape and pit it against
random search on held-out test episodes."""
import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from schedtune.agent import SacAgent, SacConfig, evaluate_policy, train_agent
from schedtune.optimizers import RandomSearchOptimizer, run_tuning
from schedtune.synthfuncs import SyntheticTuningEnv
from schedtune.tunenv import VectorEnv


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--function", default="himmelblau")
    parser.add_argument("--out", default="results/synth_agent")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--env-steps", type=int, default=20_000)
    parser.add_argument("--num-envs", type=int, default=4)
    parser.add_argument("--hidden", type=int, nargs="+", default=[128, 128])
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--eval-episodes", type=int, default=100)
    args = parser.parse_args()

    def env():
        return SyntheticTuningEnv(args.function, mode="train")

    probe = env()
    agent = SacAgent(SacConfig(obs_dim=probe.observation_dim,
                               act_dim=probe.action_dim,
                               hidden=tuple(args.hidden), lr=args.lr,
                               batch_size=128, start_steps=1000),
                     seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    eval_seeds = [int(s) for s in
                  np.random.default_rng(args.seed + 1).integers(
                      2**31, size=args.eval_episodes)]
    test_env = SyntheticTuningEnv(args.function, mode="test")

    print(f"training on {args.function} for {args.env_steps} env steps ...")
    train_agent(agent, VectorEnv([env() for _ in range(args.num_envs)]),
                total_env_steps=args.env_steps, seed=args.seed,
                eval_env=SyntheticTuningEnv(args.function, mode="test"),
                eval_seeds=eval_seeds[:20], eval_every=args.env_steps // 5,
                checkpoint_path=out / "agent.ckpt")

    agent_eps = evaluate_policy(agent, test_env, eval_seeds)
    random_eps = [run_tuning(RandomSearchOptimizer(dim=2), test_env, seed=s)
                  for s in eval_seeds]
    agent_best = np.mean([e.best_score for e in agent_eps])
    random_best = np.mean([e.best_score for e in random_eps])
    print(f"held-out mean best score over {args.eval_episodes} episodes:")
    print(f"  agent         {agent_best:.4f}")
    print(f"  random search {random_best:.4f}")
    print(f"checkpoint at {out / 'agent.ckpt'}")


if __name__ == "__main__":
    main()
