"""Group fairness metrics, performance metrics and reweighing.

Metrics that hit a zero denominator come back as ``None`` rather than NaN,
so callers have to decide what an undefined value means for them.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .dataset import DataError, LabeledDataset

METRIC_NAMES = {
    "spd": "statistical_parity_difference",
    "di": "disparate_impact",
    "di_error": "disparate_impact_error",
    "eod": "equal_opportunity_difference",
    "aod": "average_odds_difference",
    "balanced_accuracy": "balanced_accuracy",
    "f1": "f1",
}


@dataclass(frozen=True)
class Counts:
    tp: float = 0.0
    fp: float = 0.0
    tn: float = 0.0
    fn: float = 0.0

    @property
    def total(self) -> float:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    def tpr(self) -> Optional[float]:
        return _ratio(self.tp, self.tp + self.fn)

    def fpr(self) -> Optional[float]:
        return _ratio(self.fp, self.fp + self.tn)

    def tnr(self) -> Optional[float]:
        return _ratio(self.tn, self.tn + self.fp)

    def selection_rate(self) -> Optional[float]:
        return _ratio(self.tp + self.fp, self.total)


def _ratio(num, den) -> Optional[float]:
    return None if den == 0 else num / den


def _diff(a, b) -> Optional[float]:
    return None if a is None or b is None else a - b


@dataclass(frozen=True)
class GroupConfusion:
    privileged: Counts
    unprivileged: Counts

    def pooled(self) -> Counts:
        return self.privileged + self.unprivileged


def confusion_by_group(labels, predictions, protected, weights=None) -> GroupConfusion:
    labels = np.asarray(labels)
    predictions = np.asarray(predictions)
    protected = np.asarray(protected)
    n = len(labels)
    if not (len(predictions) == len(protected) == n):
        raise DataError("labels, predictions and protected differ in length")
    if not np.all((predictions == 0) | (predictions == 1)):
        raise DataError("predictions must be binary")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if len(w) != n:
        raise DataError("weights differ in length from labels")
    groups = []
    for g in (1, 0):
        m = protected == g
        if not m.any():
            raise DataError(f"no rows in the {'privileged' if g else 'unprivileged'} group")
        y, p, wg = labels[m], predictions[m], w[m]
        groups.append(Counts(
            tp=float(wg[(y == 1) & (p == 1)].sum()),
            fp=float(wg[(y == 0) & (p == 1)].sum()),
            tn=float(wg[(y == 0) & (p == 0)].sum()),
            fn=float(wg[(y == 1) & (p == 0)].sum()),
        ))
    return GroupConfusion(*groups)


class _Report:
    def to_dict(self) -> dict:
        return {METRIC_NAMES[k]: v for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class FairnessReport(_Report):
    spd: Optional[float]
    di: Optional[float]
    di_error: Optional[float]
    eod: Optional[float]
    aod: Optional[float]


@dataclass(frozen=True)
class PerformanceReport(_Report):
    balanced_accuracy: Optional[float]
    f1: Optional[float]


def disparate_impact_error(di: Optional[float]) -> Optional[float]:
    """Distance of a disparate impact from parity, ``1 - min(di, 1/di)``."""
    if di is None:
        return None
    if di == 0:
        return 1.0
    return 1.0 - min(di, 1.0 / di)


def fairness_report(conf: GroupConfusion) -> FairnessReport:
    """Unprivileged-minus-privileged metrics; negative favours the privileged."""
    p, u = conf.privileged, conf.unprivileged
    if p.total == 0 or u.total == 0:
        raise DataError("both groups need rows to compare them")
    sr_p, sr_u = p.selection_rate(), u.selection_rate()
    di = _ratio(sr_u, sr_p)
    eod = _diff(u.tpr(), p.tpr())
    fpr_gap = _diff(u.fpr(), p.fpr())
    aod = None if eod is None or fpr_gap is None else 0.5 * (fpr_gap + eod)
    return FairnessReport(
        spd=sr_u - sr_p,
        di=di,
        di_error=disparate_impact_error(di),
        eod=eod,
        aod=aod,
    )


def performance_report(conf: GroupConfusion | Counts) -> PerformanceReport:
    c = conf.pooled() if isinstance(conf, GroupConfusion) else conf
    tpr, tnr = c.tpr(), c.tnr()
    bal = None if tpr is None or tnr is None else 0.5 * (tpr + tnr)
    return PerformanceReport(balanced_accuracy=bal, f1=_ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn))


def reweigh(ds: LabeledDataset) -> np.ndarray:
    """Instance weights that make label and protected attribute independent.

    Each row in cell (s, y) gets ``n(s) * n(y) / (n * n(s, y))``.
    """
    s, y = ds.protected, ds.labels
    n = len(y)
    weights = np.empty(n)
    for sv in (0, 1):
        for yv in (0, 1):
            cell = (s == sv) & (y == yv)
            n_sy = int(cell.sum())
            if n_sy == 0:
                raise DataError(f"no rows with protected={sv} and label={yv}; cannot reweigh")
            weights[cell] = (int((s == sv).sum()) * int((y == yv).sum())) / (n * n_sy)
    return weights
