"""Report emission: JSON bundle, delimited tables and rendered figures.

Writes report.json (byte-stable for a fixed config and seed), a
performance.csv table with one row per arm and classifier, and SVG figures:
a kappa-by-arm chart plus, when per-checkpoint metrics were recorded, the
quality trajectories over training epochs.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .experiments import ARM_ORDER, ExperimentReport

CSV_HEADER = [
    "arm", "classifier",
    "kappa", "kappa_se", "acc", "acc_se",
    "sens", "sens_se", "spec", "spec_se",
]
CSV_METRICS = ("kappa", "accuracy", "sensitivity", "specificity")


def emit_report(report: ExperimentReport, out_dir: str | Path) -> list[Path]:
    """Write the report bundle; returns the created file paths."""
    if not report.arms:
        raise ValueError("report holds no arms")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out_dir / "report.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    written.append(json_path)

    csv_path = out_dir / "performance.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for arm in _arm_order(report):
            for kind, stats in report.arms[arm].items():
                row = [arm, kind]
                for name in CSV_METRICS:
                    row.append(f"{stats[name]['mean']:.6f}")
                    row.append(f"{stats[name]['se']:.6f}")
                writer.writerow(row)
    written.append(csv_path)

    written.append(_plot_performance(report, out_dir / "performance.svg"))
    traj_path = _plot_trajectories(report, out_dir / "quality_trajectories.svg")
    if traj_path is not None:
        written.append(traj_path)
    return written


def _arm_order(report: ExperimentReport) -> list[str]:
    return [a for a in ARM_ORDER if a in report.arms]


def _save_svg(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _plot_performance(report: ExperimentReport, path: Path) -> Path:
    arms = _arm_order(report)
    kinds = list(report.arms[arms[0]].keys())
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / len(arms)
    for i, arm in enumerate(arms):
        means = [report.arms[arm][k]["kappa"]["mean"] for k in kinds]
        ses = [report.arms[arm][k]["kappa"]["se"] for k in kinds]
        xs = [j + i * width for j in range(len(kinds))]
        ax.bar(xs, means, width=width, yerr=ses, capsize=3, label=arm)
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(kinds))])
    ax.set_xticklabels(kinds)
    ax.set_ylabel("kappa")
    ax.set_title(f"{report.experiment}: kappa by arm and classifier")
    ax.legend()
    fig.tight_layout()
    return _save_svg(fig, path)


def _checkpoint_series(report: ExperimentReport) -> list[list[dict]]:
    series = []
    for it in report.provenance.get("iterations", []):
        entries = it.get("selection", {}).get("per_checkpoint", [])
        if entries:
            series.append(entries)
    return series


def _plot_trajectories(report: ExperimentReport, path: Path) -> Path | None:
    series = _checkpoint_series(report)
    if not series:
        return None
    panels = [
        ("t_metric", "T metric"),
        ("mmd2", "MMD$^2$ (held out)"),
        ("val_kappa", "validation kappa"),
    ]
    panels = [
        (key, label)
        for key, label in panels
        if any(e.get(key) is not None for entries in series for e in entries)
    ]
    fig, axes = plt.subplots(1, len(panels), figsize=(4 * len(panels), 3.2))
    if len(panels) == 1:
        axes = [axes]
    for ax, (key, label) in zip(axes, panels):
        for i, entries in enumerate(series):
            pts = [(e["epoch"], e[key]) for e in entries if e.get(key) is not None]
            if not pts:
                continue
            xs, ys = zip(*pts)
            ax.plot(xs, ys, marker="o", markersize=3, label=f"iter {i}")
        ax.set_xlabel("epoch")
        ax.set_ylabel(label)
    if len(series) > 1:
        axes[0].legend(fontsize=7)
    fig.suptitle(f"{report.experiment}: quality over training")
    fig.tight_layout()
    return _save_svg(fig, path)
