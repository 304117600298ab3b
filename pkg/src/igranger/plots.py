"""Figure rendering for the CLI report path.

Every figure goes to a file next to the corresponding CSV; the CSVs remain
the canonical machine-readable outputs.  Uses the non-interactive Agg
backend so rendering works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import EvalReport


def save_curve_figures(report: EvalReport, out_dir: str | Path,
                       stem: str = "graph") -> list:
    """ROC and precision-recall curves from the report's threshold sweep."""
    out_dir = Path(out_dir)
    written = []
    if not report.curve:
        return written
    fpr = [0.0] + [p.fpr for p in report.curve]
    tpr = [0.0] + [p.tpr for p in report.curve]
    rec = [p.tpr for p in report.curve]
    prec = [p.precision for p in report.curve]

    fig, ax = plt.subplots(figsize=(4.2, 4.0))
    ax.plot(fpr, tpr, marker=".", lw=1.2)
    ax.plot([0, 1], [0, 1], ls="--", c="gray", lw=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    auroc = "n/a" if report.auroc is None else f"{report.auroc:.3f}"
    ax.set_title(f"ROC (AUROC = {auroc})")
    fig.tight_layout()
    path = out_dir / f"{stem}_roc.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(4.2, 4.0))
    ax.plot(rec, prec, marker=".", lw=1.2)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_ylim(-0.02, 1.02)
    auprc = "n/a" if report.auprc is None else f"{report.auprc:.3f}"
    ax.set_title(f"Precision-recall (AUPRC = {auprc})")
    fig.tight_layout()
    path = out_dir / f"{stem}_pr.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written


def save_adjacency_figure(pred: np.ndarray, truth: np.ndarray | None,
                          path: str | Path, title: str = "adjacency") -> Path:
    """Predicted adjacency (and truth, when given) as side-by-side heatmaps."""
    mats = [(np.asarray(pred), "predicted")]
    if truth is not None:
        mats.append((np.asarray(truth), "truth"))
    fig, axes = plt.subplots(1, len(mats), figsize=(4.0 * len(mats), 3.6),
                             squeeze=False)
    for ax, (mat, label) in zip(axes[0], mats):
        ax.imshow(mat, cmap="Blues", vmin=0, vmax=max(1.0, float(mat.max())))
        ax.set_title(f"{title}: {label}")
        ax.set_xlabel("cause j")
        ax.set_ylabel("effect i")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_trace_figure(traces, path: str | Path) -> Path:
    """Per-node composite objective traces on a log-scaled x axis."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for i, trace in enumerate(traces):
        ax.plot(np.arange(len(trace)), trace, lw=1.0, label=f"node {i}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    if len(traces) <= 10:
        ax.legend(fontsize=7)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_benchmark_figure(rows: list, metric_names: list,
                          path: str | Path) -> Path:
    """Grouped bars of metric means per benchmark cell."""
    labels = [f"{r['dataset']}/{r['model']}" for r in rows]
    x = np.arange(len(rows))
    width = 0.8 / max(1, len(metric_names))
    fig, ax = plt.subplots(figsize=(max(5.0, 1.3 * len(rows)), 3.8))
    for m, name in enumerate(metric_names):
        vals = [r.get(f"{name}_mean") for r in rows]
        vals = [np.nan if v in (None, "") else float(v) for v in vals]
        errs = [r.get(f"{name}_std") for r in rows]
        errs = [0.0 if e in (None, "") else float(e) for e in errs]
        ax.bar(x + m * width, vals, width, yerr=errs, capsize=2, label=name)
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("metric value")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
