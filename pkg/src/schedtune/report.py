"""Result aggregation and reporting for tuning experiments.

Trial tables use a versioned CSV schema.  Each (method, scenario) pair
contributes one reference evaluation at trial index 0 (the fixed initial
weights) and its tuned trials at indices >= 1; summaries recompute the best
tuned score from the raw rows rather than trusting any precomputed column.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ProtocolError
from .tunenv import EPS_REWARD

CSV_SCHEMA_VERSION = 1

TRIAL_FIELDS = ("schema_version", "experiment", "method", "scenario_seed",
                "scenario_digest", "trial", "score")
SUMMARY_FIELDS = ("schema_version", "experiment", "method", "n_scenarios",
                  "mean_reference", "mean_best", "mean_improvement",
                  "win_rate")


@dataclass(frozen=True)
class MethodSummary:
    experiment: str
    method: str
    n_scenarios: int
    mean_reference: float
    mean_best: float
    mean_improvement: float
    win_rate: float


def trial_rows(experiment: str, method: str, scenario_seed: int, episode,
               action_names) -> list[dict]:
    """Flatten one tuning episode into CSV rows, reference trial first."""
    def row(trial, action, score):
        out = {
            "schema_version": CSV_SCHEMA_VERSION,
            "experiment": experiment,
            "method": method,
            "scenario_seed": scenario_seed,
            "scenario_digest": episode.scenario_digest,
            "trial": trial,
            "score": repr(float(score)),
        }
        for name, value in zip(action_names, action):
            out[name] = repr(float(value))
        return out

    rows = [row(0, episode.initial_action, episode.r0)]
    rows.extend(row(i, action, score)
                for i, (action, score) in enumerate(episode.trials, start=1))
    return rows


def write_trials_csv(path, rows, action_names) -> None:
    header = list(TRIAL_FIELDS) + list(action_names)
    new_file = not _nonempty(path)
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=header)
        if new_file:
            writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _nonempty(path) -> bool:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return bool(fh.readline())
    except OSError:
        return False


def read_trials_csv(path) -> list[dict]:
    try:
        with open(path, "r", newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            raw = list(reader)
    except OSError as exc:
        raise ConfigError(f"cannot read trials table {path}: {exc}") from exc
    rows = []
    for line_no, row in enumerate(raw, start=2):
        version = row.get("schema_version")
        if version != str(CSV_SCHEMA_VERSION):
            raise ProtocolError(
                f"{path} line {line_no}: unknown schema version {version!r}, "
                f"this build reads version {CSV_SCHEMA_VERSION}")
        try:
            rows.append({
                "experiment": row["experiment"],
                "method": row["method"],
                "scenario_seed": int(row["scenario_seed"]),
                "scenario_digest": row["scenario_digest"],
                "trial": int(row["trial"]),
                "score": float(row["score"]),
            })
        except (KeyError, ValueError) as exc:
            raise ProtocolError(
                f"{path} line {line_no}: malformed trial row ({exc})") from exc
    return rows


def summarize_trials(rows) -> list[MethodSummary]:
    """Aggregate per method; best scores are recomputed from trials >= 1."""
    if not rows:
        raise ConfigError("no trial rows to summarize")
    groups: dict[tuple, dict[int, float]] = {}
    experiments = set()
    for row in rows:
        experiments.add(row["experiment"])
        key = (row["method"], row["scenario_seed"], row["scenario_digest"])
        trials = groups.setdefault(key, {})
        if row["trial"] in trials:
            raise ProtocolError(
                f"duplicate trial {row['trial']} for method {row['method']} "
                f"scenario {row['scenario_seed']}")
        trials[row["trial"]] = row["score"]
    experiment = "+".join(sorted(experiments))

    per_method: dict[str, list[tuple[float, float]]] = {}
    for (method, seed, _digest), trials in groups.items():
        if 0 not in trials:
            raise ProtocolError(
                f"method {method} scenario {seed} lacks the reference trial")
        tuned = [score for trial, score in trials.items() if trial >= 1]
        if not tuned:
            raise ProtocolError(
                f"method {method} scenario {seed} has no tuned trials")
        per_method.setdefault(method, []).append((trials[0], max(tuned)))

    summaries = []
    for method in sorted(per_method):
        pairs = np.array(per_method[method])
        reference, best = pairs[:, 0], pairs[:, 1]
        improvement = (best - reference) / np.maximum(reference, EPS_REWARD)
        summaries.append(MethodSummary(
            experiment=experiment,
            method=method,
            n_scenarios=len(pairs),
            mean_reference=float(reference.mean()),
            mean_best=float(best.mean()),
            mean_improvement=float(improvement.mean()),
            win_rate=float(np.mean(best > reference)),
        ))
    return summaries


def write_summary_csv(path, summaries) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        writer.writeheader()
        for s in summaries:
            writer.writerow({
                "schema_version": CSV_SCHEMA_VERSION,
                "experiment": s.experiment,
                "method": s.method,
                "n_scenarios": s.n_scenarios,
                "mean_reference": f"{s.mean_reference:.6f}",
                "mean_best": f"{s.mean_best:.6f}",
                "mean_improvement": f"{s.mean_improvement:.6f}",
                "win_rate": f"{s.win_rate:.6f}",
            })


def read_summary_csv(path) -> list[MethodSummary]:
    try:
        with open(path, "r", newline="", encoding="utf-8") as fh:
            raw = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read summary {path}: {exc}") from exc
    out = []
    for line_no, row in enumerate(raw, start=2):
        if row.get("schema_version") != str(CSV_SCHEMA_VERSION):
            raise ProtocolError(
                f"{path} line {line_no}: unknown schema version "
                f"{row.get('schema_version')!r}")
        out.append(MethodSummary(
            experiment=row["experiment"],
            method=row["method"],
            n_scenarios=int(row["n_scenarios"]),
            mean_reference=float(row["mean_reference"]),
            mean_best=float(row["mean_best"]),
            mean_improvement=float(row["mean_improvement"]),
            win_rate=float(row["win_rate"]),
        ))
    return out


# -- plotting ----------------------------------------------------------------

_BAR_COLORS = ("#9aa5b1", "#3472b8")


def render_score_chart(summaries, title="Tuned score by method") -> str:
    """Grouped bar chart (reference vs best score) as a standalone SVG."""
    if not summaries:
        raise ConfigError("nothing to plot")
    width, height = 640, 360
    left, right, top, bottom = 60, 20, 48, 56
    plot_w = width - left - right
    plot_h = height - top - bottom
    n = len(summaries)
    group_w = plot_w / n
    bar_w = min(48.0, group_w / 3.0)

    def y_of(value):
        return top + plot_h * (1.0 - min(max(value, 0.0), 1.0))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = y_of(tick)
        parts.append(f'<line x1="{left}" y1="{y:.1f}" x2="{width - right}" '
                     f'y2="{y:.1f}" stroke="#dddddd"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{tick:g}</text>')
    for i, s in enumerate(summaries):
        cx = left + group_w * (i + 0.5)
        for j, (value, color) in enumerate(
                ((s.mean_reference, _BAR_COLORS[0]),
                 (s.mean_best, _BAR_COLORS[1]))):
            x = cx + (j - 1) * bar_w + bar_w / 2
            y = y_of(value)
            parts.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w:.1f}" '
                         f'height="{top + plot_h - y:.1f}" fill="{color}"/>')
            parts.append(f'<text x="{x + bar_w / 2:.1f}" y="{y - 4:.1f}" '
                         f'text-anchor="middle" font-family="sans-serif" '
                         f'font-size="10">{value:.3f}</text>')
        parts.append(f'<text x="{cx:.1f}" y="{height - bottom + 18}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="12">{s.method}</text>')
    legend_y = height - 16
    parts.append(f'<rect x="{left}" y="{legend_y - 10}" width="12" height="12" '
                 f'fill="{_BAR_COLORS[0]}"/>')
    parts.append(f'<text x="{left + 18}" y="{legend_y}" font-family="sans-serif" '
                 f'font-size="12">initial weights</text>')
    parts.append(f'<rect x="{left + 130}" y="{legend_y - 10}" width="12" '
                 f'height="12" fill="{_BAR_COLORS[1]}"/>')
    parts.append(f'<text x="{left + 148}" y="{legend_y}" '
                 f'font-family="sans-serif" font-size="12">best tuned</text>')
    parts.append(f'<line x1="{left}" y1="{top}" x2="{left}" '
                 f'y2="{top + plot_h}" stroke="#333333"/>')
    parts.append(f'<line x1="{left}" y1="{top + plot_h}" '
                 f'x2="{width - right}" y2="{top + plot_h}" stroke="#333333"/>')
    parts.append("</svg>")
    return "\n".join(parts)


def render_report_md(summaries, chart_filename="scores.svg",
                     config_echo: dict | None = None) -> str:
    lines = ["# Tuning results", ""]
    experiment = summaries[0].experiment if summaries else ""
    lines.append(f"Experiment: `{experiment}`")
    lines.append("")
    lines.append("| method | scenarios | mean initial | mean best tuned "
                 "| mean improvement | win rate |")
    lines.append("|---|---:|---:|---:|---:|---:|")
    for s in summaries:
        lines.append(
            f"| {s.method} | {s.n_scenarios} | {s.mean_reference:.4f} "
            f"| {s.mean_best:.4f} | {s.mean_improvement:+.4f} "
            f"| {s.win_rate:.0%} |")
    lines.append("")
    lines.append(f"![score chart]({chart_filename})")
    lines.append("")
    lines.append("Improvement is relative to the score of the fixed initial "
                 "weights on the same scenario; the win rate counts scenarios "
                 "where some tuned trial beat that reference.")
    if config_echo is not None:
        lines.append("")
        lines.append("## Configuration")
        lines.append("")
        lines.append("```json")
        lines.append(json.dumps(config_echo, indent=2, sort_keys=True))
        lines.append("```")
    lines.append("")
    return "\n".join(lines)
