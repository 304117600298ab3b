"""Structure and target-recovery metrics.

Binary metrics (accuracy, precision, recall, F1, SHD) are computed over the
full d x d entry set, optionally excluding the diagonal.  Ranked metrics
(AUROC, AUPRC) sweep a threshold over the distinct score values, grouping
ties, and integrate with the trapezoidal rule; they are omitted when the
prediction carries no scores or the truth is degenerate (all positive or
all negative).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .datatypes import DataError, GrangerGraph, InterventionalFamily


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    tpr: float
    fpr: float
    precision: float


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    shd: int
    auroc: float | None
    auprc: float | None
    tp: int
    fp: int
    fn: int
    tn: int
    n_edges_true: int
    n_edges_pred: int
    n_entries: int
    include_diagonal: bool
    curve: tuple | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.curve is not None:
            out["curve"] = [asdict(p) for p in self.curve]
        return out

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @staticmethod
    def csv_header() -> list:
        return ["accuracy", "auroc", "auprc", "f1", "recall", "precision", "shd",
                "n_edges_true", "n_edges_pred"]

    def to_csv_row(self) -> list:
        def fmt(v):
            return "" if v is None else repr(float(v))
        return [fmt(self.accuracy), fmt(self.auroc), fmt(self.auprc), fmt(self.f1),
                fmt(self.recall), fmt(self.precision), str(self.shd),
                str(self.n_edges_true), str(self.n_edges_pred)]


@dataclass(frozen=True)
class TargetReport:
    """Edge-level reports per environment plus pooled, and environment-level
    detection of which environments were intervened at all."""

    per_env: tuple
    pooled: EvalReport
    env_pred: tuple
    env_truth: tuple
    env_detection_accuracy: float

    def to_dict(self) -> dict:
        return {
            "pooled": self.pooled.to_dict(),
            "per_env": [r.to_dict() for r in self.per_env],
            "env_pred": list(self.env_pred),
            "env_truth": list(self.env_truth),
            "env_detection_accuracy": self.env_detection_accuracy,
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def _entry_mask(d: int, include_diagonal: bool) -> np.ndarray:
    mask = np.ones((d, d), dtype=bool)
    if not include_diagonal:
        np.fill_diagonal(mask, False)
    return mask


def confusion_counts(pred: np.ndarray, truth: np.ndarray) -> tuple:
    tp = int(np.sum((pred == 1) & (truth == 1)))
    fp = int(np.sum((pred == 1) & (truth == 0)))
    fn = int(np.sum((pred == 0) & (truth == 1)))
    tn = int(np.sum((pred == 0) & (truth == 0)))
    return tp, fp, fn, tn


def _binary_report(pred: np.ndarray, truth: np.ndarray,
                   scores: np.ndarray | None,
                   include_diagonal: bool) -> EvalReport:
    pred = np.asarray(pred).ravel().astype(int)
    truth = np.asarray(truth).ravel().astype(int)
    tp, fp, fn, tn = confusion_counts(pred, truth)
    n = tp + fp + fn + tn
    accuracy = (tp + tn) / n
    shd = fp + fn
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision = 1.0 if fn == 0 else 0.0
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall = 1.0 if fp == 0 else 0.0
    if 2 * tp + fp + fn > 0:
        f1 = 2 * tp / (2 * tp + fp + fn)
    else:
        f1 = 1.0  # both prediction and truth are empty
    auroc = auprc = None
    curve = None
    if scores is not None and 0 < truth.sum() < truth.size:
        auroc, auprc, curve = ranked_metrics(np.asarray(scores, dtype=float).ravel(),
                                             truth)
    return EvalReport(
        accuracy=accuracy, precision=precision, recall=recall, f1=f1, shd=shd,
        auroc=auroc, auprc=auprc, tp=tp, fp=fp, fn=fn, tn=tn,
        n_edges_true=int(truth.sum()), n_edges_pred=int(pred.sum()),
        n_entries=n, include_diagonal=include_diagonal, curve=curve,
    )


def ranked_metrics(scores: np.ndarray, truth: np.ndarray) -> tuple:
    """AUROC, AUPRC and curve points from a threshold sweep with grouped ties.

    Thresholds run over the distinct score values in decreasing order;
    "predicted positive" at threshold s means score >= s.  Trapezoidal
    integration over the resulting (fpr, tpr) and (recall, precision)
    points; with ties grouped this matches the rank-based AUROC exactly,
    so any strictly monotone transform of the scores leaves both areas
    unchanged.
    """
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    t_sorted = truth[order]
    distinct = np.flatnonzero(np.diff(s_sorted)) + 1
    ends = np.append(distinct, truth.size)  # cumulative count at each distinct score
    cum_tp = np.cumsum(t_sorted)
    tp_at = cum_tp[ends - 1]
    fp_at = ends - tp_at
    tpr = np.concatenate(([0.0], tp_at / n_pos))
    fpr = np.concatenate(([0.0], fp_at / n_neg))
    auroc = float(np.trapezoid(tpr, fpr))
    rec = tp_at / n_pos
    prec = tp_at / ends
    # left-anchor the curve at recall 0 with the first group's precision
    auprc = float(np.trapezoid(np.concatenate(([prec[0]], prec)),
                               np.concatenate(([0.0], rec))))
    thresholds = s_sorted[ends - 1]
    curve = tuple(
        CurvePoint(threshold=float(thresholds[i]), tpr=float(tpr[i + 1]),
                   fpr=float(fpr[i + 1]), precision=float(prec[i]))
        for i in range(len(ends))
    )
    return auroc, auprc, curve


def score_graph(pred: GrangerGraph, truth: GrangerGraph,
                include_diagonal: bool = True) -> EvalReport:
    """Score a predicted graph against the ground truth.

    Binary metrics use the prediction's adjacency; AUROC/AUPRC rank the
    prediction's scores when present.
    """
    if pred.d != truth.d:
        raise DataError(f"dimension mismatch: prediction d={pred.d}, truth d={truth.d}")
    mask = _entry_mask(pred.d, include_diagonal)
    scores = pred.scores[mask] if pred.scores is not None else None
    return _binary_report(pred.adjacency[mask], truth.adjacency[mask],
                          scores, include_diagonal)


def score_targets(pred: InterventionalFamily, truth: InterventionalFamily,
                  scores: list | None = None,
                  include_diagonal: bool = True) -> TargetReport:
    """Score recovered intervention targets per environment and pooled.

    An environment counts as intervened iff any target entry is 1;
    detection accuracy is the fraction of environments whose intervened /
    non-intervened status matches.
    """
    if pred.n_envs != truth.n_envs or pred.d != truth.d:
        raise DataError(
            f"shape mismatch: prediction ({pred.n_envs} envs, d={pred.d}) vs "
            f"truth ({truth.n_envs} envs, d={truth.d})"
        )
    mask = _entry_mask(pred.d, include_diagonal)
    per_env = []
    pooled_pred, pooled_truth, pooled_scores = [], [], []
    for k in range(pred.n_envs):
        sc = None if scores is None else np.asarray(scores[k], dtype=float)[mask]
        per_env.append(_binary_report(pred.targets[k][mask], truth.targets[k][mask],
                                      sc, include_diagonal))
        pooled_pred.append(pred.targets[k][mask])
        pooled_truth.append(truth.targets[k][mask])
        if sc is not None:
            pooled_scores.append(sc)
    pooled = _binary_report(
        np.concatenate(pooled_pred), np.concatenate(pooled_truth),
        np.concatenate(pooled_scores) if pooled_scores else None,
        include_diagonal,
    )
    env_pred = tuple(pred.is_intervened(k) for k in range(pred.n_envs))
    env_truth = tuple(truth.is_intervened(k) for k in range(truth.n_envs))
    detection = float(np.mean([p == t for p, t in zip(env_pred, env_truth)]))
    return TargetReport(per_env=tuple(per_env), pooled=pooled,
                        env_pred=env_pred, env_truth=env_truth,
                        env_detection_accuracy=detection)


def save_curve_csv(report: EvalReport, path: str | Path) -> None:
    """Write the per-threshold curve points for external plotting."""
    lines = ["threshold,tpr,fpr,precision"]
    for p in report.curve or ():
        lines.append(f"{p.threshold!r},{p.tpr!r},{p.fpr!r},{p.precision!r}")
    Path(path).write_text("\n".join(lines) + "\n")
