"""Evaluation reports: JSON, aligned text table, TSV, and figures.

The figure files land next to the delimited output so a run directory is
self-contained: metric bars, the answer-presence funnel across pipeline
stages, and the error-category breakdown.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_STAGE_LABELS = ("retrieval", "pruning", "cutoff", "top-5", "rank-1")


def _as_float(value):
    return float(value) if isinstance(value, Fraction) else value


def render_metrics_table(metric_values: dict) -> str:
    """Small aligned table, one metric per row."""
    width = max(len(name) for name in metric_values)
    lines = ["%-*s  %8s" % (width, "metric", "value"),
             "%s  %s" % ("-" * width, "-" * 8)]
    for name, value in metric_values.items():
        lines.append("%-*s  %8.4f" % (width, name, _as_float(value)))
    return "\n".join(lines)


def render_presence_table(trace: dict) -> str:
    presence = trace["presence"]
    width = max(len(s) for s in _STAGE_LABELS)
    lines = ["%-*s  %8s" % (width, "stage", "presence"),
             "%s  %s" % ("-" * width, "-" * 8)]
    for label, key in zip(_STAGE_LABELS, presence):
        lines.append("%-*s  %8.4f" % (width, label, _as_float(presence[key])))
    lines.append("")
    lines.append("failure breakdown (%d failures):" % trace["failures"])
    for category, fraction in trace["error_breakdown"].items():
        lines.append("  %5.1f%%  %s" % (100 * _as_float(fraction), category))
    return "\n".join(lines)


def write_rows_tsv(path: Path, rows: list[dict]) -> None:
    """Per-question delimited output."""
    columns = ("id", "question", "refused", "fallback_used", "rank", "top_answer", "gold")
    with path.open("w", encoding="utf-8") as handle:
        handle.write("\t".join(columns) + "\n")
        for row in rows:
            handle.write("\t".join(str(row.get(c, "")) for c in columns) + "\n")


def save_metrics_figure(path: Path, metric_values: dict) -> None:
    names = list(metric_values)
    values = [_as_float(metric_values[n]) for n in names]
    fig, ax = plt.subplots(figsize=(4.2, 3.0))
    ax.bar(names, values, color="#4878a8")
    ax.set_ylim(0, 1.0)
    ax.set_ylabel("score")
    for i, v in enumerate(values):
        ax.text(i, v + 0.02, "%.3f" % v, ha="center", fontsize=9)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_presence_figure(path: Path, trace: dict) -> None:
    presence = [_as_float(v) for v in trace["presence"].values()]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.4, 3.2))
    ax1.plot(range(len(presence)), presence, marker="o", color="#4878a8")
    ax1.set_xticks(range(len(_STAGE_LABELS)))
    ax1.set_xticklabels(_STAGE_LABELS, rotation=30, ha="right", fontsize=8)
    ax1.set_ylim(0, 1.05)
    ax1.set_ylabel("answer presence")
    ax1.set_title("presence along the pipeline", fontsize=10)

    breakdown = trace["error_breakdown"]
    fractions = [_as_float(v) for v in breakdown.values()]
    ax2.barh(range(len(fractions)), fractions, color="#a85048")
    ax2.set_yticks(range(len(fractions)))
    ax2.set_yticklabels(["(%s)" % r for r in ("i", "ii", "iii", "iv", "v")], fontsize=8)
    ax2.invert_yaxis()
    ax2.set_xlim(0, 1.0)
    ax2.set_title("failure categories", fontsize=10)
    for ax in (ax1, ax2):
        ax.spines["right"].set_visible(False)
        ax.spines["top"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_eval_report(out_dir: str | Path, metric_values: dict, trace: dict | None,
                      rows: list[dict], figures: bool = True) -> dict[str, Path]:
    """Write report.json, report.txt, report.tsv and the figure files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "metrics": {k: _as_float(v) for k, v in metric_values.items()},
        "questions": len(rows),
    }
    if trace is not None:
        payload["presence"] = {k: _as_float(v) for k, v in trace["presence"].items()}
        payload["failures"] = trace["failures"]
        payload["error_breakdown"] = {k: _as_float(v) for k, v in trace["error_breakdown"].items()}
    paths = {"json": out_dir / "report.json", "txt": out_dir / "report.txt",
             "tsv": out_dir / "report.tsv"}
    paths["json"].write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    text = render_metrics_table(metric_values)
    if trace is not None:
        text += "\n\n" + render_presence_table(trace)
    paths["txt"].write_text(text + "\n", encoding="utf-8")
    write_rows_tsv(paths["tsv"], rows)
    if figures:
        paths["metrics_png"] = out_dir / "metrics.png"
        save_metrics_figure(paths["metrics_png"], metric_values)
        if trace is not None:
            paths["presence_png"] = out_dir / "presence.png"
            save_presence_figure(paths["presence_png"], trace)
    return paths
