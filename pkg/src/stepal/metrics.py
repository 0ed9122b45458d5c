"""Clip-wise accuracy and macro precision / recall / Jaccard.

Macro averages run over classes with non-zero support in the evaluated set.
A zero denominator scores 0 and the class is listed in ``undefined``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EmptyTestSet

AVERAGING = "macro over classes with support > 0"
METRIC_NAMES = ("accuracy", "macro_precision", "macro_recall", "macro_jaccard")


def confusion_matrix(y_true, y_pred, n_classes):
    """Rows are true classes, columns predicted."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred differ in length")
    flat = y_true * n_classes + y_pred
    return np.bincount(flat, minlength=n_classes * n_classes).reshape(n_classes, n_classes)


@dataclass(frozen=True)
class ClassScore:
    precision: float
    recall: float
    jaccard: float
    support: int


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_jaccard: float
    per_class: tuple
    undefined: tuple = field(default=())
    averaging: str = AVERAGING

    def as_dict(self):
        return {name: getattr(self, name) for name in METRIC_NAMES}


def _ratio(num, den):
    return (num / den, False) if den > 0 else (0.0, True)


def report_from_confusion(cm) -> MetricReport:
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total == 0:
        raise EmptyTestSet("no clips to evaluate")
    tp = np.diag(cm)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    per_class, undefined = [], []
    for c in range(cm.shape[0]):
        fp = int(predicted[c] - tp[c])
        fn = int(support[c] - tp[c])
        p, p_bad = _ratio(int(tp[c]), int(tp[c]) + fp)
        r, r_bad = _ratio(int(tp[c]), int(tp[c]) + fn)
        j, j_bad = _ratio(int(tp[c]), int(tp[c]) + fp + fn)
        if p_bad or r_bad or j_bad:
            undefined.append(c)
        per_class.append(ClassScore(p, r, j, int(support[c])))
    present = [s for s in per_class if s.support > 0]

    def macro(name):
        # fsum: correctly rounded, so the result does not depend on class order
        return math.fsum(getattr(s, name) for s in present) / len(present)

    return MetricReport(
        accuracy=float(tp.sum() / total),
        macro_precision=macro("precision"),
        macro_recall=macro("recall"),
        macro_jaccard=macro("jaccard"),
        per_class=tuple(per_class),
        undefined=tuple(undefined),
    )


def score_predictions(y_true, y_pred, n_classes) -> MetricReport:
    return report_from_confusion(confusion_matrix(y_true, y_pred, n_classes))


def evaluate(pool, model, ids=None) -> MetricReport:
    """Predict every clip of ``ids`` (default all) and score against true steps."""
    X, y = pool.stacked(ids)
    if X.shape[0] == 0:
        raise EmptyTestSet("no test clips")
    if y is None:
        raise ValueError("evaluation needs true steps on every clip")
    pred = np.argmax(model.logits(X), axis=1)
    return score_predictions(y, pred, pool.step_count)
