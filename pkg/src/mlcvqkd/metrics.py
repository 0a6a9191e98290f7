"""Multi-label evaluation metrics: Prec/Rec/FPR, AP, ROC, AUC.

Precision, recall and false-positive rate are computed per label from the
TP/FP/FN/TN partition and macro-averaged (unweighted label mean). Average
precision scores how well each sample's true labels outrank its false
ones. ROC curves sweep the decision threshold over a label's scores; the
area under the curve, averaged over labels, is the classifier efficiency
Lambda used by the key-rate formulas.

Conventions, chosen where the defining ratios are 0/0 and documented here
because synthetic fixtures hit them:
  - Precision with TP+FP = 0 is 1 if TP+FN = 0 (nothing to find, nothing
    claimed), else 0. Symmetrically, recall with TP+FN = 0 is 1 if
    TP+FP = 0, else 0. FPR with FP+TN = 0 is 0.
  - Ranking ties are broken by label index after score.
  - Samples whose true label set is empty are skipped by AP and its
    normalizer counts only the non-skipped samples, so a perfect ranking
    scores exactly 1.
  - An erased prediction (label set matching no constellation state)
    counts as predicting no labels in Prec/Rec/FPR; AP/ROC/AUC rank raw
    scores and are unaffected by erasure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError


@dataclass
class PrfResult:
    precision: np.ndarray
    recall: np.ndarray
    fpr: np.ndarray

    @property
    def macro_precision(self) -> float:
        return float(self.precision.mean())

    @property
    def macro_recall(self) -> float:
        return float(self.recall.mean())

    @property
    def macro_fpr(self) -> float:
        return float(self.fpr.mean())


def _as_flag_matrix(flags, name):
    arr = np.asarray(flags, dtype=bool)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D (samples, labels) flag array, got shape {arr.shape}")
    return arr


def prf(pred_flags: np.ndarray, true_flags: np.ndarray) -> PrfResult:
    """Per-label precision, recall and FPR from boolean flag matrices."""
    pred = _as_flag_matrix(pred_flags, "predictions")
    true = _as_flag_matrix(true_flags, "truths")
    if pred.shape != true.shape:
        raise InvalidInputError(f"prediction shape {pred.shape} != truth shape {true.shape}")

    tp = (pred & true).sum(axis=0).astype(float)
    fp = (pred & ~true).sum(axis=0).astype(float)
    fn = (~pred & true).sum(axis=0).astype(float)
    tn = (~pred & ~true).sum(axis=0).astype(float)

    precision = np.where(tp + fp > 0, tp / np.maximum(tp + fp, 1), np.where(tp + fn == 0, 1.0, 0.0))
    recall = np.where(tp + fn > 0, tp / np.maximum(tp + fn, 1), np.where(tp + fp == 0, 1.0, 0.0))
    fpr = np.where(fp + tn > 0, fp / np.maximum(fp + tn, 1), 0.0)
    return PrfResult(precision=precision, recall=recall, fpr=fpr)


def _rank_order(score_row: np.ndarray) -> np.ndarray:
    """1-based rank of each label: descending score, ties to lower index."""
    order = np.argsort(-score_row, kind="stable")  # stable keeps index order on ties
    ranks = np.empty(len(score_row), dtype=int)
    ranks[order] = np.arange(1, len(score_row) + 1)
    return ranks


def average_precision(scores: np.ndarray, true_flags: np.ndarray) -> float:
    """Mean over samples of the per-sample label-ranking precision.

    For each sample and each of its true labels y, the fraction of labels
    ranked at or above y that are themselves true, averaged over the
    sample's labels, then over samples with at least one true label.
    """
    scores = np.asarray(scores, dtype=float)
    true = _as_flag_matrix(true_flags, "truths")
    if scores.shape != true.shape:
        raise InvalidInputError(f"score shape {scores.shape} != truth shape {true.shape}")

    total = 0.0
    counted = 0
    for score_row, true_row in zip(scores, true):
        true_idx = np.flatnonzero(true_row)
        if true_idx.size == 0:
            continue
        ranks = _rank_order(score_row)
        true_ranks = np.sort(ranks[true_idx])
        # with true ranks sorted ascending, i true labels rank at or above the i-th
        sample_ap = np.mean([(i + 1) / r for i, r in enumerate(true_ranks)])
        total += sample_ap
        counted += 1
    if counted == 0:
        raise InvalidInputError("average precision needs at least one sample with a true label")
    return total / counted


def roc_curve(scores: np.ndarray, truth: np.ndarray) -> tuple[np.ndarray, float]:
    """ROC points and trapezoidal AUC for one label.

    Sweeps the threshold over the distinct score values, from above the
    maximum (predicting nothing, the (0,0) point) to at or below the
    minimum (predicting everything, the (1,1) point). Tied scores move
    diagonally in one step, so the trapezoidal area equals the pairwise
    positives-above-negatives statistic with ties half-weighted.

    Returns (points, auc) where points has rows (fpr, tpr); auc is nan
    when the label has no positive or no negative samples.
    """
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    n_pos = int(truth.sum())
    n_neg = int((~truth).sum())

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_truth = truth[order]

    cum_tp = np.cumsum(sorted_truth)
    cum_fp = np.cumsum(~sorted_truth)
    # keep only the last position of each run of equal scores
    last_of_run = np.append(sorted_scores[1:] != sorted_scores[:-1], True)
    tp = np.concatenate([[0], cum_tp[last_of_run]])
    fp = np.concatenate([[0], cum_fp[last_of_run]])

    if n_pos == 0 or n_neg == 0:
        tpr = np.zeros_like(tp, dtype=float) if n_pos == 0 else tp / n_pos
        fpr = np.zeros_like(fp, dtype=float) if n_neg == 0 else fp / n_neg
        return np.column_stack([fpr, tpr]), float("nan")

    tpr = tp / n_pos
    fpr = fp / n_neg
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return np.column_stack([fpr, tpr]), auc


@dataclass
class EvaluationReport:
    """Full metric suite for one evaluation run."""

    n_samples: int
    n_erasures: int
    per_label_precision: list[float]
    per_label_recall: list[float]
    per_label_fpr: list[float]
    macro_precision: float
    macro_recall: float
    macro_fpr: float
    average_precision: float
    roc_points: list[np.ndarray]
    per_label_auc: list[float]
    average_auc: float
    undefined_auc_labels: list[int] = field(default_factory=list)

    @property
    def erasure_rate(self) -> float:
        return self.n_erasures / self.n_samples if self.n_samples else 0.0

    def to_json_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "n_erasures": self.n_erasures,
            "erasure_rate": self.erasure_rate,
            "per_label_precision": self.per_label_precision,
            "per_label_recall": self.per_label_recall,
            "per_label_fpr": self.per_label_fpr,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_fpr": self.macro_fpr,
            "average_precision": self.average_precision,
            "per_label_auc": self.per_label_auc,
            "average_auc": self.average_auc,
            "undefined_auc_labels": self.undefined_auc_labels,
            "roc_points": [pts.tolist() for pts in self.roc_points],
        }


def evaluate(scores: np.ndarray, pred_flags: np.ndarray, true_flags: np.ndarray,
             erased: np.ndarray | None = None) -> EvaluationReport:
    """Build the full report from scores, thresholded flags, and truths.

    `erased` marks samples whose predicted label set decoded to no state;
    their prediction flags are zeroed for Prec/Rec/FPR.
    """
    scores = np.asarray(scores, dtype=float)
    pred = _as_flag_matrix(pred_flags, "predictions")
    true = _as_flag_matrix(true_flags, "truths")
    n = true.shape[0]

    if erased is None:
        erased = np.zeros(n, dtype=bool)
    else:
        erased = np.asarray(erased, dtype=bool)
    effective_pred = pred & ~erased[:, None]

    rates = prf(effective_pred, true)
    ap = average_precision(scores, true)

    roc_points, aucs, undefined = [], [], []
    for j in range(true.shape[1]):
        pts, auc = roc_curve(scores[:, j], true[:, j])
        roc_points.append(pts)
        aucs.append(auc)
        if np.isnan(auc):
            undefined.append(j + 1)
    defined = [a for a in aucs if not np.isnan(a)]
    if not defined:
        raise InvalidInputError("every label has single-class truth; no AUC is defined")

    return EvaluationReport(
        n_samples=n,
        n_erasures=int(erased.sum()),
        per_label_precision=list(map(float, rates.precision)),
        per_label_recall=list(map(float, rates.recall)),
        per_label_fpr=list(map(float, rates.fpr)),
        macro_precision=rates.macro_precision,
        macro_recall=rates.macro_recall,
        macro_fpr=rates.macro_fpr,
        average_precision=float(ap),
        roc_points=roc_points,
        per_label_auc=[float(a) for a in aucs],
        average_auc=float(np.mean(defined)),
        undefined_auc_labels=undefined,
    )
