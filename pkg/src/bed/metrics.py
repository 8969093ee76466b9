"""Threshold calibration and the six-metric evaluation battery.

OOD is always the positive class. Decision convention: score >= threshold
means OOD. FPR@TPR uses the achieved step-function TPR with no
interpolation; AUPR is step-wise average precision; zero-denominator
F1/MCC return 0 so degenerate grid cells stay total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detectors import DetectionScores, DirectVerdicts


@dataclass(frozen=True)
class CalibratedEvaluation:
    """Chosen threshold plus the metric report for one grid cell.

    Score-based metrics (threshold, fpr/aupr/auroc) are None for
    direct-inference detectors; f1 and mcc are always present.
    """

    f1: float
    mcc: float
    threshold: float | None = None
    fpr_at_90: float | None = None
    fpr_at_95: float | None = None
    aupr: float | None = None
    auroc: float | None = None
    score_metrics_present: bool = True


def _as_scores(scores) -> np.ndarray:
    if isinstance(scores, DetectionScores):
        scores = scores.scores
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("scores must be a non-empty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError("scores must be finite")
    return arr


def _as_labels(labels) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("labels must be a non-empty 1-d vector")
    return arr.astype(bool)


def _confusion(pred: np.ndarray, labels: np.ndarray):
    tp = int(np.sum(pred & labels))
    fp = int(np.sum(pred & ~labels))
    fn = int(np.sum(~pred & labels))
    tn = int(np.sum(~pred & ~labels))
    return tp, fp, fn, tn


def f1_score(pred, labels) -> float:
    pred = _as_labels(pred)
    labels = _as_labels(labels)
    if pred.shape != labels.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {labels.shape}")
    tp, fp, fn, _ = _confusion(pred, labels)
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def mcc(pred, labels) -> float:
    pred = _as_labels(pred)
    labels = _as_labels(labels)
    if pred.shape != labels.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {labels.shape}")
    tp, fp, fn, tn = _confusion(pred, labels)
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom)


def _sweep(scores: np.ndarray, labels: np.ndarray):
    """Cumulative TP/FP at every distinct threshold, scores descending.

    Returns (tps, fps, n_pos, n_neg) where entry i corresponds to the
    decision "score >= i-th largest distinct score"; tied scores grouped.
    """
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    # last index of each tie group
    distinct = np.flatnonzero(np.diff(sorted_scores) != 0.0)
    ends = np.concatenate([distinct, [scores.size - 1]])
    tps = np.cumsum(sorted_labels)[ends]
    fps = np.cumsum(~sorted_labels)[ends]
    return tps, fps, int(labels.sum()), int((~labels).sum())


def auroc(scores, labels) -> float:
    """Trapezoidal ROC area; ties grouped (Mann-Whitney with half-ties)."""
    scores = _as_scores(scores)
    labels = _as_labels(labels)
    tps, fps, n_pos, n_neg = _sweep(scores, labels)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes required for AUROC")
    tpr = np.concatenate([[0.0], tps / n_pos])
    fpr = np.concatenate([[0.0], fps / n_neg])
    return float(np.trapezoid(tpr, fpr))


def aupr(scores, labels) -> float:
    """Step-wise average precision over descending-score threshold groups."""
    scores = _as_scores(scores)
    labels = _as_labels(labels)
    tps, fps, n_pos, _ = _sweep(scores, labels)
    if n_pos == 0:
        raise ValueError("at least one positive required for AUPR")
    recall_steps = np.diff(np.concatenate([[0], tps])) / n_pos
    precision = tps / (tps + fps)
    return float(np.sum(recall_steps * precision))


def fpr_at_tpr(scores, labels, tpr_target: float) -> float:
    """Minimum FPR over thresholds whose achieved TPR reaches the target."""
    if not 0.0 < tpr_target <= 1.0:
        raise ValueError(f"tpr_target must be in (0, 1], got {tpr_target}")
    scores = _as_scores(scores)
    labels = _as_labels(labels)
    tps, fps, n_pos, n_neg = _sweep(scores, labels)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes required for FPR@TPR")
    reaching = (tps / n_pos) >= tpr_target
    return float((fps[reaching] / n_neg).min())


def calibrate_threshold(val_scores, val_labels) -> float:
    """Smallest candidate threshold maximizing F1 on the validation data.

    Candidates are midpoints between consecutive distinct sorted scores
    plus sentinels below the minimum and above the maximum.
    """
    scores = _as_scores(val_scores)
    labels = _as_labels(val_labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise ValueError("both classes required to calibrate a threshold")

    distinct = np.unique(scores)  # ascending
    candidates = np.concatenate([
        [distinct[0] - 1.0],
        (distinct[:-1] + distinct[1:]) / 2.0,
        [distinct[-1] + 1.0],
    ])
    # candidate i < len predicts score >= distinct[i]; the last predicts none
    tps, fps, n_pos, _ = _sweep(scores, labels)
    tps_asc = tps[::-1]  # tps_asc[i]: TP of decision "score >= distinct[i]"
    fps_asc = fps[::-1]
    f1s = np.zeros(candidates.size)
    # denominator 2*tp + fp + fn >= n_pos >= 1, so division is safe
    f1s[:-1] = 2 * tps_asc / (tps_asc + fps_asc + n_pos)
    f1s[-1] = 0.0  # above-max sentinel predicts everything ID
    return float(candidates[int(np.argmax(f1s))])


def evaluate(result, test_labels, val_scores=None, val_labels=None,
             ) -> CalibratedEvaluation:
    """Full metric battery for one grid cell.

    Scoring detectors supply test scores plus validation scores/labels for
    threshold calibration; direct-inference detectors supply verdicts and
    get only F1/MCC.
    """
    test_labels = _as_labels(test_labels)
    if isinstance(result, DirectVerdicts):
        pred = result.is_ood
        return CalibratedEvaluation(
            f1=f1_score(pred, test_labels),
            mcc=mcc(pred, test_labels),
            score_metrics_present=False,
        )
    scores = _as_scores(result)
    if val_scores is None or val_labels is None:
        raise ValueError("scoring detectors need validation scores and labels")
    threshold = calibrate_threshold(val_scores, val_labels)
    pred = scores >= threshold
    return CalibratedEvaluation(
        f1=f1_score(pred, test_labels),
        mcc=mcc(pred, test_labels),
        threshold=threshold,
        fpr_at_90=fpr_at_tpr(scores, test_labels, 0.90),
        fpr_at_95=fpr_at_tpr(scores, test_labels, 0.95),
        aupr=aupr(scores, test_labels),
        auroc=auroc(scores, test_labels),
        score_metrics_present=True,
    )
