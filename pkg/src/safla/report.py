"""Figures for sweep and benchmark results.  Uses the non-interactive Agg backend."""

from __future__ import annotations

import os
from collections import defaultdict
from statistics import mean

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, out_dir, name) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def _means(rows, x, fields):
    by_x = defaultdict(list)
    for r in rows:
        by_x[r[x]].append(r)
    xs = sorted(by_x)
    return xs, {f: [mean(float(r[f]) for r in by_x[v]) for v in xs] for f in fields}


def plot_hijack(rows, out_dir) -> str:
    xs, ys = _means(rows, "intensity", ("pre", "post", "baseline"))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(xs, ys["post"], "o-", label="SAFLA (after cycle)")
    ax.plot(xs, ys["baseline"], "s--", label="primary/backup")
    ax.plot(xs, ys["pre"], "x:", color="grey", label="before remediation")
    ax.set_xlabel("attack intensity (%)")
    ax.set_ylabel("intent survival rate")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(loc="lower left")
    return _save(fig, out_dir, "survival_vs_intensity.png")


def plot_completeness(rows, out_dir) -> str:
    xs, ys = _means(rows, "completeness", ("post", "baseline", "feasible"))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(xs, ys["post"], "o-", label="SAFLA (after cycle)")
    ax.plot(xs, ys["baseline"], "s--", label="primary/backup")
    ax.plot(xs, ys["feasible"], ":", color="grey", label="feasible")
    ax.set_xlabel("topology completeness (%)")
    ax.set_ylabel("intent survival rate")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(loc="lower right")
    return _save(fig, out_dir, "survival_vs_completeness.png")


def plot_timeline(rows, out_dir, name="timeline.png") -> str:
    """Per-step survival from scenario metric rows (scenario, seed, step, metric, value)."""
    series = defaultdict(dict)
    for _, _, step, metric, value in rows:
        if metric in ("survival_pre", "survival", "baseline_survival"):
            series[metric][int(step)] = float(value)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    labels = {"survival_pre": "before cycle", "survival": "after cycle",
              "baseline_survival": "primary/backup"}
    for metric, style in (("survival_pre", "x:"), ("survival", "o-"), ("baseline_survival", "s--")):
        pts = sorted(series[metric].items())
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], style, label=labels[metric])
    ax.set_xlabel("step")
    ax.set_ylabel("intent survival rate")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(loc="lower left")
    return _save(fig, out_dir, name)


def plot_bench(rows, x, out_dir, name) -> str:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    groups = defaultdict(list)
    other = "switches" if x == "intents" else "intents"
    for r in rows:
        groups[r[other]].append((r[x], r["seconds"] * 1e3))
    for label, pts in sorted(groups.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", label=f"{other}={label}")
    ax.set_xlabel(x)
    ax.set_ylabel("median time (ms)")
    ax.legend()
    return _save(fig, out_dir, name)
