"""Classification metrics and forward-chaining (train on the past) evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calibration import fit_calibrator
from .logistic import LogisticConfig, train_logistic
from .tree import TreeConfig, train_tree


@dataclass
class MetricReport:
    month: str
    n: int
    accuracy: float
    precision: dict
    recall: dict
    f1: dict
    macro_f1: float
    flags: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "month": self.month,
            "n": self.n,
            "accuracy": self.accuracy,
            "precision": {str(k): v for k, v in self.precision.items()},
            "recall": {str(k): v for k, v in self.recall.items()},
            "f1": {str(k): v for k, v in self.f1.items()},
            "macro_f1": self.macro_f1,
            "flags": list(self.flags),
        }


def classification_report(y_true, y_pred, month: str = "") -> MetricReport:
    """Accuracy and per-class precision/recall/F1 for labels {0, 1}.

    Undefined ratios (empty denominators) are reported as 0 and flagged.
    """
    yt = np.asarray(y_true).astype(int)
    yp = np.asarray(y_pred).astype(int)
    if yt.shape != yp.shape:
        raise ValueError("y_true and y_pred differ in shape")
    n = len(yt)
    flags = []
    prec, rec, f1 = {}, {}, {}
    for c in (0, 1):
        tp = int(np.sum((yp == c) & (yt == c)))
        pred_c = int(np.sum(yp == c))
        true_c = int(np.sum(yt == c))
        if pred_c == 0:
            prec[c] = 0.0
            flags.append(f"precision[{c}] undefined")
        else:
            prec[c] = tp / pred_c
        if true_c == 0:
            rec[c] = 0.0
            flags.append(f"recall[{c}] undefined")
        else:
            rec[c] = tp / true_c
        s = prec[c] + rec[c]
        f1[c] = 2 * prec[c] * rec[c] / s if s > 0 else 0.0
    acc = float(np.mean(yt == yp)) if n else 0.0
    if n == 0:
        flags.append("no rows")
    return MetricReport(month, n, acc, prec, rec, f1, (f1[0] + f1[1]) / 2, flags)


class ConstantModel:
    """Stand-in predictor when training months hold a single class."""

    def __init__(self, value: float):
        self.value = float(value)

    def predict_proba(self, X) -> np.ndarray:
        return np.full(len(X), self.value)

    def predict_raw(self, X) -> np.ndarray:
        return self.predict_proba(X)


def fit_family(family: str, X, y, cfg=None, feature_names=None):
    y = np.asarray(y)
    if len(y) and y.min() == y.max():
        return ConstantModel(float(y[0]))
    if family == "logistic":
        return train_logistic(X, y, cfg or LogisticConfig(), feature_names)
    if family == "tree":
        return train_tree(X, y, cfg or TreeConfig(), feature_names)
    raise ValueError(f"unknown model family {family!r}")


def _raw(model, X):
    return model.predict_raw(X) if hasattr(model, "predict_raw") else model.predict_proba(X)


def forward_chain_eval(tables: Sequence, family: str = "logistic", cfg=None,
                       calibrate: bool = False, n_bins: int = 10) -> list[MetricReport]:
    """Train on months ``< m`` and score month ``m`` for every month after the first.

    With ``calibrate`` the month-``m`` predictions pass through a calibrator
    fit on month ``m-1`` scores of a model trained on months ``< m-1``.
    """
    if len(tables) < 2:
        raise ValueError("forward chaining needs at least two months")
    reports = []
    for m in range(1, len(tables)):
        X = np.vstack([t.X for t in tables[:m]])
        y = np.concatenate([t.y for t in tables[:m]])
        model = fit_family(family, X, y, cfg, tables[m].feature_names)
        p = _raw(model, tables[m].X)
        flags = ["single-class training"] if isinstance(model, ConstantModel) else []
        if calibrate and m >= 2:
            Xc = np.vstack([t.X for t in tables[: m - 1]])
            yc = np.concatenate([t.y for t in tables[: m - 1]])
            prior = fit_family(family, Xc, yc, cfg, tables[m].feature_names)
            cal = fit_calibrator(_raw(prior, tables[m - 1].X), tables[m - 1].y, n_bins,
                                 tables[m - 1].month)
            p = cal.apply(p)
        rep = classification_report(tables[m].y, (p >= 0.5).astype(int), tables[m].month)
        rep.flags = flags + rep.flags
        reports.append(rep)
    return reports
