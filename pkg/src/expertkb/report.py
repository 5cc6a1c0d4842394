"""Render a metrics report to files: JSON, plain-text table, CSV, and
matplotlib figures (weekly volume, rating distribution, target comparison).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import (  # noqa: E402
    ACCURACY_TARGET,
    CORRECTION_TARGET,
    NPS_TARGET,
    UNDEFINED,
    VOLUME_TARGET,
    MetricsReport,
    report_rows,
)

TABLE_COLUMNS = ("Dimension", "Metric", "Target", "Computed", "Met")


def render_text_table(report: MetricsReport) -> str:
    rows = report_rows(report)
    widths = [len(c) for c in TABLE_COLUMNS]
    cells = []
    for row in rows:
        line = (row["dimension"], row["metric"], row["target"], row["computed"], row["met"])
        cells.append(line)
        widths = [max(w, len(v)) for w, v in zip(widths, line)]
    out = []
    header = "  ".join(c.ljust(w) for c, w in zip(TABLE_COLUMNS, widths))
    out.append(header)
    out.append("-" * len(header))
    for line in cells:
        out.append("  ".join(v.ljust(w) for v, w in zip(line, widths)))
    out.append("")
    out.append(f"window: {report.window[0]} .. {report.window[1]}")
    out.append(f"resolution_rate: {report.resolution_rate}")
    out.append(f"mean_time_to_answer_ms: {report.mean_time_to_answer_ms}")
    return "\n".join(out) + "\n"


def _volume_figure(report: MetricsReport, path: Path) -> None:
    weeks = sorted(report.weekly_query_volume)
    counts = [report.weekly_query_volume[w] for w in weeks]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.bar(weeks, counts, color="#4878a8")
    ax.axhline(VOLUME_TARGET, color="#b04030", linestyle="--", label=f"target > {VOLUME_TARGET:g}/wk")
    ax.set_ylabel("queries")
    ax.set_title("Weekly query volume")
    ax.legend()
    if len(weeks) > 6:
        ax.tick_params(axis="x", rotation=45)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _ratings_figure(ratings: list[dict], path: Path) -> None:
    buckets = {r: 0 for r in range(1, 6)}
    for r in ratings:
        buckets[r["rating"]] = buckets.get(r["rating"], 0) + 1
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar([str(k) for k in buckets], list(buckets.values()), color="#5a9367")
    ax.set_xlabel("accuracy rating")
    ax.set_ylabel("responses")
    ax.set_title("Expert review ratings")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _targets_figure(report: MetricsReport, path: Path) -> None:
    pairs = [
        ("accuracy", report.accuracy, ACCURACY_TARGET),
        ("correction", report.correction_rate, CORRECTION_TARGET),
        ("volume/50", _scale(report.mean_weekly_volume, VOLUME_TARGET), 1.0),
        ("nps/40", _scale(report.nps, NPS_TARGET), 1.0),
    ]
    labels = [p[0] for p in pairs]
    values = [p[1] if p[1] != UNDEFINED else 0.0 for p in pairs]
    targets = [p[2] for p in pairs]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    x = range(len(pairs))
    ax.bar([i - 0.17 for i in x], values, width=0.34, label="computed", color="#4878a8")
    ax.bar([i + 0.17 for i in x], targets, width=0.34, label="target", color="#c8a858")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels)
    ax.set_title("Computed metrics vs targets")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _scale(value, denom):
    if value == UNDEFINED:
        return UNDEFINED
    return value / denom


def write_report(
    report: MetricsReport, out_dir: str, ratings: list[dict] | None = None
) -> dict[str, str]:
    """Write report.json, report.txt, report.csv, and the figures; returns a
    name -> path map of everything written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}

    json_path = out / "report.json"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump({"report": report.to_dict(), "rows": report_rows(report)}, fh, indent=2, sort_keys=True)
    written["json"] = str(json_path)

    txt_path = out / "report.txt"
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write(render_text_table(report))
    written["text"] = str(txt_path)

    csv_path = out / "report.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TABLE_COLUMNS)
        for row in report_rows(report):
            writer.writerow(
                [row["dimension"], row["metric"], row["target"], row["computed"], row["met"]]
            )
    written["csv"] = str(csv_path)

    volume_path = out / "weekly_volume.png"
    _volume_figure(report, volume_path)
    written["volume_figure"] = str(volume_path)

    if ratings is not None:
        ratings_path = out / "rating_distribution.png"
        _ratings_figure(ratings, ratings_path)
        written["ratings_figure"] = str(ratings_path)

    targets_path = out / "targets.png"
    _targets_figure(report, targets_path)
    written["targets_figure"] = str(targets_path)
    return written
