"""Report rendering: aligned text tables, delimited output, and figures.

Every experiment report can be written as a bundle: the JSON report itself,
a per-slug CSV, a summary table laid out like the paper tables (rows are
models, columns NDCG / SRC / KTCC / RA), and PNG figures next to them.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import ExperimentReport
from .metrics import MetricReport

METRIC_COLUMNS = ("ndcg", "src", "ktcc", "ra")


def _fmt(value) -> str:
    if value is None:
        return "-"
    return f"{value:.4f}"


def format_summary_table(rows: Sequence[tuple[str, Mapping]]) -> str:
    """Aligned text table of aggregate metrics, one row per model/report."""
    header = ["model"] + [c.upper() for c in METRIC_COLUMNS] + ["slugs"]
    body = [
        [name] + [_fmt(agg.get(c)) for c in METRIC_COLUMNS] + [str(agg.get("n_slugs", "-"))]
        for name, agg in rows
    ]
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = []
    for row in [header] + body:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n"


def write_per_slug_csv(report: MetricReport, path: Path) -> None:
    """Per-slug metric values as comma-delimited rows (undefined left blank)."""
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slug_id", "n_docs", "ndcg", "src", "ktcc", "ra"])
        for slug_id in sorted(report.per_slug):
            row = report.per_slug[slug_id]
            writer.writerow([
                slug_id,
                row.get("n_docs", ""),
                "" if row.get("ndcg") is None else repr(row["ndcg"]),
                "" if row.get("src") is None else repr(row["src"]),
                "" if row.get("ktcc") is None else repr(row["ktcc"]),
                row.get("ra", ""),
            ])


def _aggregate_figure(report: MetricReport, title: str, path: Path) -> None:
    values = [report.aggregates.get(c) for c in METRIC_COLUMNS]
    labels = [c.upper() for c in METRIC_COLUMNS]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    xs = range(len(labels))
    heights = [0.0 if v is None else v for v in values]
    bars = ax.bar(xs, heights, color="#4878a8")
    for bar, v in zip(bars, values):
        ax.annotate("-" if v is None else f"{v:.3f}",
                    (bar.get_x() + bar.get_width() / 2, bar.get_height()),
                    ha="center", va="bottom", fontsize=8)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels)
    ax.set_ylim(0, 1.08)
    ax.set_ylabel("aggregate value")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _per_slug_figure(report: MetricReport, title: str, path: Path) -> None:
    fig, axes = plt.subplots(2, 2, figsize=(7, 5))
    for ax, key in zip(axes.flat[:3], ("ndcg", "src", "ktcc")):
        values = [row[key] for row in report.per_slug.values() if row.get(key) is not None]
        if values:
            lo = min(0.0, min(values))
            ax.hist(values, bins=20, range=(min(lo, -1.0) if key != "ndcg" else 0.0, 1.0),
                    color="#4878a8")
        ax.set_title(key.upper(), fontsize=10)
        ax.set_ylabel("slugs")
    ra_counts = [0, 0]
    for row in report.per_slug.values():
        ra_counts[int(row.get("ra", 0))] += 1
    ax = axes.flat[3]
    ax.bar(["wrong", "exact"], ra_counts, color=["#b04a4a", "#4a8a56"])
    ax.set_title("RA", fontsize=10)
    ax.set_ylabel("slugs")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _fold_figure(folds: Sequence[Mapping], title: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.2))
    n = len(folds)
    width = 0.8 / len(METRIC_COLUMNS)
    for j, key in enumerate(METRIC_COLUMNS):
        xs = [i + j * width for i in range(n)]
        ys = [f["aggregates"].get(key) or 0.0 for f in folds]
        ax.bar(xs, ys, width=width, label=key.upper())
    ax.set_xticks([i + 0.4 - width / 2 for i in range(n)])
    ax.set_xticklabels([str(f.get("fold", i)) for i, f in enumerate(folds)])
    ax.set_xlabel("fold")
    ax.set_ylim(0, 1.08)
    ax.legend(fontsize=8, ncol=4)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_bundle(exp: ExperimentReport, outdir: str | Path, figures: bool = True,
                 name: str | None = None) -> dict[str, Path]:
    """Write report.json, per_slug.csv, summary.txt, and figures into a directory."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    label = name or f"{exp.config.get('family', 'model')} ({exp.mode})"
    paths: dict[str, Path] = {}

    report_path = outdir / "report.json"
    report_path.write_text(exp.to_json(), encoding="utf-8")
    paths["report"] = report_path

    csv_path = outdir / "per_slug.csv"
    write_per_slug_csv(exp.metrics, csv_path)
    paths["per_slug"] = csv_path

    summary = format_summary_table([(label, exp.metrics.aggregates)])
    extras = []
    und = exp.metrics.undefined
    if any(und.values()):
        extras.append("undefined per metric: " + ", ".join(f"{k}={v}" for k, v in sorted(und.items())))
    if exp.metrics.regression:
        extras.append("regression: " + ", ".join(f"{k}={v:.4f}" for k, v in sorted(exp.metrics.regression.items())))
    if exp.metrics.classification:
        extras.append("classification: " + ", ".join(f"{k}={v:.4f}" for k, v in sorted(exp.metrics.classification.items())))
    for w in list(exp.metrics.warnings) + list(exp.warnings):
        extras.append(f"warning: {w}")
    text = summary + ("\n".join(extras) + "\n" if extras else "")
    summary_path = outdir / "summary.txt"
    summary_path.write_text(text, encoding="utf-8")
    paths["summary"] = summary_path

    if figures:
        agg_path = outdir / "metrics_summary.png"
        _aggregate_figure(exp.metrics, label, agg_path)
        paths["metrics_figure"] = agg_path
        slug_path = outdir / "per_slug_distributions.png"
        _per_slug_figure(exp.metrics, label, slug_path)
        paths["per_slug_figure"] = slug_path
        if exp.folds and len(exp.folds) > 1:
            fold_path = outdir / "fold_metrics.png"
            _fold_figure(exp.folds, label, fold_path)
            paths["fold_figure"] = fold_path
    return paths
