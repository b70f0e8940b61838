#!/usr/bin/env python3
"""Compare the baseline tuning methods on sampled cluster scenarios.

Runs fixed / random / bo / tpe over the same scenario seeds, then writes
trials.csv, summary.csv, scores.svg and report.md into --out.
"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from schedtune.cli import run_tune
from schedtune.config import ExperimentConfig
from schedtune.report import (read_trials_csv, render_report_md,
                              render_score_chart, summarize_trials,
                              write_summary_csv)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/faas_comparison")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--scenarios", type=int, default=20)
    parser.add_argument("--mode", default="test", choices=["train", "test"])
    parser.add_argument("--duration", type=float, default=100.0)
    parser.add_argument("--methods", nargs="+",
                        default=["fixed", "random", "bo", "tpe"])
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    config = ExperimentConfig(name="faas-comparison", env_kind="faas",
                              mode=args.mode, n_scenarios=args.scenarios,
                              duration_s=args.duration)
    out = Path(args.out)
    for method in args.methods:
        print(f"tuning {args.scenarios} scenarios with {method} ...")
        run_tune(config, method, args.seed, out, jobs=args.jobs)

    summaries = summarize_trials(read_trials_csv(out / "trials.csv"))
    write_summary_csv(out / "summary.csv", summaries)
    (out / "scores.svg").write_text(render_score_chart(summaries))
    (out / "report.md").write_text(
        render_report_md(summaries, config_echo=config.to_dict()))
    for s in summaries:
        print(f"{s.method:8s} best {s.mean_best:.4f} "
              f"improvement {s.mean_improvement:+.4f} win {s.win_rate:.0%}")
    print(f"artifacts in {out}/")


if __name__ == "__main__":
    main()
