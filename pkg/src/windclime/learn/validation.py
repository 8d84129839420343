"""Splits, cross-validation and evaluation metrics."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..ingest import format_float
from .classifier import Dataset, TrainedClassifier, predict_scores, train_classifier


def stratified_split(dataset: Dataset, ratio: float = 0.7, seed: int = 0):
    """Per-class shuffled train/test split.

    Each class puts ``floor(ratio * n_c)`` rows in train, clamped so that
    both sides get at least one row.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    y = dataset.y
    train, test = [], []
    for c in range(len(dataset.classes)):
        rows = np.flatnonzero(y == c)
        if len(rows) == 0:
            continue
        if len(rows) < 2:
            raise ValueError(f"class {dataset.classes[c]!r} has fewer than 2 rows")
        rows = rng.permutation(rows)
        k = min(max(int(math.floor(ratio * len(rows) + 1e-9)), 1), len(rows) - 1)
        train.extend(rows[:k])
        test.extend(rows[k:])
    return dataset.subset(sorted(train)), dataset.subset(sorted(test))


def stratified_folds(y: np.ndarray, k: int, seed: int = 0) -> np.ndarray:
    """Fold number for each row.

    Rows are shuffled within class, classes are laid end to end, and
    position ``p`` goes to fold ``p mod k``. Fold sizes then differ by at
    most one overall and per class.
    """
    y = np.asarray(y)
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(y) < k:
        raise ValueError(f"{len(y)} rows cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in np.unique(y)])
    folds = np.empty(len(y), dtype=np.int64)
    folds[order] = np.arange(len(y)) % k
    return folds


@dataclass
class CvReport:
    kind: str
    k: int
    fold_accuracies: list

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.fold_accuracies))


def kfold_cross_validate(dataset: Dataset, k: int = 10, kind: str = "SVM",
                         hyperparams: Optional[dict] = None, seed: int = 0) -> CvReport:
    folds = stratified_folds(dataset.y, k, seed)
    accs = []
    for f in range(k):
        train = dataset.subset(np.flatnonzero(folds != f))
        test = dataset.subset(np.flatnonzero(folds == f))
        model = train_classifier(kind, train, hyperparams, seed)
        S = predict_scores(model, test.X)
        pred = np.argmax(S, axis=1)
        accs.append(float(np.mean(pred == test.y)))
    return CvReport(kind, k, accs)


# ---------------------------------------------------------------------------
# ROC


def roc_curve_auc(scores: Sequence[float], labels: Sequence) -> tuple[np.ndarray, float]:
    """ROC points by sweeping thresholds over the distinct scores (high to low).

    Returns ``(points, auc)`` with ``points`` as ``(n, 2)`` rows of
    ``(FPR, TPR)`` starting at ``(0, 0)``. The trapezoid area is accumulated
    in integer counts, so it equals the pairwise concordance probability
    (ties counted one half) exactly.
    """
    s = np.asarray(scores, dtype=float)
    t = np.asarray(labels).astype(bool)
    P = int(t.sum())
    N = len(t) - P
    if P == 0 or N == 0:
        raise ValueError("ROC needs both positive and negative labels")
    order = np.argsort(-s, kind="stable")
    s, t = s[order], t[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp = np.r_[0, np.cumsum(t)[last]]
    fp = np.r_[0, np.cumsum(~t)[last]]
    twice_area = int(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
    points = np.column_stack([fp / N, tp / P])
    return points, twice_area / (2 * P * N)


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class MetricsReport:
    classes: tuple
    confusion: np.ndarray  # rows actual, columns predicted
    precision: np.ndarray
    recall: np.ndarray
    auc: np.ndarray  # NaN where a class is absent from the test labels
    roc: dict = field(default_factory=dict)
    undefined: list = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.confusion.sum())

    @property
    def macro_auc(self) -> float:
        """Mean one-vs-rest AUC over classes present in the test set."""
        a = self.auc[~np.isnan(self.auc)]
        return float(a.mean()) if len(a) else float("nan")


def metrics_from_predictions(classes, y_true, y_pred, scores=None) -> MetricsReport:
    n = len(classes)
    cm = np.zeros((n, n), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    precision = np.zeros(n)
    recall = np.zeros(n)
    undefined = []
    for c in range(n):
        tp = cm[c, c]
        fp = cm[:, c].sum() - tp
        fn = cm[c, :].sum() - tp
        if tp + fp:
            precision[c] = tp / (tp + fp)
        else:
            undefined.append(f"precision:{classes[c]}")
        if tp + fn:
            recall[c] = tp / (tp + fn)
        else:
            undefined.append(f"recall:{classes[c]}")
    auc = np.full(n, np.nan)
    roc = {}
    if scores is not None:
        y_true = np.asarray(y_true)
        for c in range(n):
            pos = y_true == c
            if pos.any() and (~pos).any():
                roc[classes[c]], auc[c] = roc_curve_auc(scores[:, c], pos)
    return MetricsReport(tuple(classes), cm, precision, recall, auc, roc, undefined)


def evaluate(model: TrainedClassifier, test: Dataset) -> MetricsReport:
    if len(test) == 0:
        raise ValueError("empty test set")
    if tuple(test.classes) != tuple(model.classes):
        raise ValueError("test set and model disagree on the class list")
    S = predict_scores(model, test.X)
    return metrics_from_predictions(model.classes, test.y, np.argmax(S, axis=1), S)


def cross_station_evaluate(model: TrainedClassifier, other: Dataset) -> MetricsReport:
    """Evaluate a model trained at one station on another station's storms.

    The report's ``macro_auc`` is the cross-station "average accuracy".
    """
    return evaluate(model, other)


# ---------------------------------------------------------------------------
# CSV output


def _csv(rows) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerows(rows)
    return out.getvalue()


def format_metrics_csv(report: MetricsReport) -> str:
    rows = [("class", "precision", "recall", "auc")]
    for i, c in enumerate(report.classes):
        rows.append((c, format_float(report.precision[i]), format_float(report.recall[i]),
                     format_float(report.auc[i])))
    rows.append(("macro", "", "", format_float(report.macro_auc)))
    rows.append(("accuracy", "", "", format_float(report.accuracy)))
    return _csv(rows)


def format_confusion_csv(report: MetricsReport) -> str:
    rows = [("actual\\predicted",) + tuple(report.classes)]
    for i, c in enumerate(report.classes):
        rows.append((c,) + tuple(int(v) for v in report.confusion[i]))
    return _csv(rows)


def format_roc_csv(report: MetricsReport) -> str:
    rows = [("class", "fpr", "tpr")]
    for c in report.classes:
        for fpr, tpr in report.roc.get(c, ()):
            rows.append((c, format_float(fpr), format_float(tpr)))
    return _csv(rows)


def format_cv_csv(reports: Sequence[CvReport]) -> tuple[str, str]:
    """Summary (``kind,k,mean_accuracy,std_accuracy``) and per-fold tables."""
    summary = [("kind", "k", "mean_accuracy", "std_accuracy")]
    folds = [("kind", "fold", "accuracy")]
    for r in reports:
        summary.append((r.kind, r.k, format_float(r.mean_accuracy), format_float(r.std_accuracy)))
        folds.extend((r.kind, i, format_float(a)) for i, a in enumerate(r.fold_accuracies))
    return _csv(summary), _csv(folds)
