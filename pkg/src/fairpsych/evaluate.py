"""Grouped cross-validation with validation-set threshold selection.

For every outer fold the development set is split again by group into a
training and a validation part. A model fit on the training part scores the
validation part; the threshold maximizing validation balanced accuracy is
kept. The model is then refit on the whole development set and evaluated on
the test fold at that threshold.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
from scipy import stats

from .dataset import DataError, LabeledDataset, SplitSpec, group_partition
from .fairness import (
    METRIC_NAMES,
    FairnessReport,
    PerformanceReport,
    confusion_by_group,
    fairness_report,
    performance_report,
    reweigh,
)
from .models import ForestConfig, LogisticConfig, train_forest, train_logistic

log = logging.getLogger(__name__)

DEFAULT_GRID = tuple(round(0.01 * i, 2) for i in range(1, 100))
CLASSIFIERS = ("logistic", "forest")
MITIGATIONS = ("none", "reweigh", "prejudice")
# Order of metrics in tables and files.
METRICS = ("balanced_accuracy", "f1", "di", "di_error", "aod", "spd", "eod")


@dataclass(frozen=True)
class ExperimentConfig:
    classifier: str = "logistic"
    mitigation: str = "none"
    eta: float = 25.0
    k_folds: int = 5
    inner_train_fraction: float = 0.625
    threshold_grid: tuple[float, ...] = DEFAULT_GRID
    seed: int = 0
    logistic: LogisticConfig = field(default_factory=LogisticConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)

    def __post_init__(self):
        if self.classifier not in CLASSIFIERS:
            raise DataError(f"classifier must be one of {CLASSIFIERS}")
        if self.mitigation not in MITIGATIONS:
            raise DataError(f"mitigation must be one of {MITIGATIONS}")
        if self.mitigation == "prejudice" and self.classifier != "logistic":
            raise DataError("the prejudice remover is only defined for logistic regression")
        if self.eta < 0:
            raise DataError("eta must be non-negative")
        if self.k_folds < 2:
            raise DataError("k_folds must be at least 2")
        if not 0 < self.inner_train_fraction < 1:
            raise DataError("inner_train_fraction must lie in (0, 1)")
        grid = tuple(float(t) for t in self.threshold_grid)
        if not grid or any(not 0 < t < 1 for t in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise DataError("threshold_grid must be strictly increasing values in (0, 1)")
        if int(self.seed) < 0:
            raise DataError("seed must be unsigned")
        object.__setattr__(self, "threshold_grid", grid)

    @property
    def label(self) -> str:
        if self.mitigation == "prejudice":
            return f"{self.classifier}+prejudice(eta={self.eta:g})"
        return f"{self.classifier}+{self.mitigation}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["threshold_grid"] = list(self.threshold_grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise DataError(f"unknown experiment config keys: {sorted(unknown)}")
        try:
            if "logistic" in d:
                d["logistic"] = LogisticConfig(**d["logistic"])
            if "forest" in d:
                d["forest"] = ForestConfig(**d["forest"])
            if "threshold_grid" in d:
                d["threshold_grid"] = tuple(d["threshold_grid"])
            return cls(**d)
        except TypeError as exc:
            raise DataError(str(exc)) from None


@dataclass(frozen=True)
class SweepCurve:
    thresholds: tuple[float, ...]
    balanced_accuracy: tuple[Optional[float], ...]
    di_error: tuple[Optional[float], ...]
    aod: tuple[Optional[float], ...]

    def __post_init__(self):
        n = len(self.thresholds)
        if not (len(self.balanced_accuracy) == len(self.di_error) == len(self.aod) == n):
            raise DataError("sweep curve columns differ in length")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise DataError("sweep thresholds must be strictly increasing")


def classify(scores, threshold: float) -> np.ndarray:
    """Favourable prediction iff the score is strictly above the threshold."""
    return (np.asarray(scores) > threshold).astype(np.int8)


def sweep(scores, labels, protected, grid=DEFAULT_GRID, weights=None) -> SweepCurve:
    bal, die, aod = [], [], []
    for t in grid:
        conf = confusion_by_group(labels, classify(scores, t), protected, weights)
        fair = fairness_report(conf)
        bal.append(performance_report(conf).balanced_accuracy)
        die.append(fair.di_error)
        aod.append(fair.aod)
    return SweepCurve(tuple(float(t) for t in grid), tuple(bal), tuple(die), tuple(aod))


def select_threshold(curve: SweepCurve) -> float:
    """Threshold of maximal balanced accuracy; ties go to the smallest threshold."""
    best_t, best = None, -math.inf
    for t, b in zip(curve.thresholds, curve.balanced_accuracy):
        if b is not None and b > best:
            best_t, best = t, b
    if best_t is None:
        raise DataError("balanced accuracy is undefined at every threshold")
    return best_t


@dataclass(frozen=True, eq=False)
class FoldTrace:
    """Row indices (into the full dataset), weights and scores of one fold."""

    test_rows: np.ndarray
    train_rows: np.ndarray
    val_rows: np.ndarray
    train_weights: np.ndarray
    dev_weights: np.ndarray
    val_scores: np.ndarray
    test_scores: np.ndarray

    @property
    def dev_rows(self) -> np.ndarray:
        return np.sort(np.concatenate([self.train_rows, self.val_rows]))


@dataclass(frozen=True)
class FoldResult:
    fold_index: int
    chosen_threshold: float
    performance: PerformanceReport
    fairness: FairnessReport
    trace: Optional[FoldTrace] = field(default=None, compare=False, repr=False)

    def metric(self, name: str) -> Optional[float]:
        if name in ("balanced_accuracy", "f1"):
            return getattr(self.performance, name)
        return getattr(self.fairness, name)


@dataclass(frozen=True)
class MetricSummary:
    mean: Optional[float]
    std: Optional[float]
    n: int
    undefined: int = 0


def _mean_std(values) -> tuple[Optional[float], Optional[float]]:
    if not values:
        return None, None
    a = np.asarray(values, dtype=float)
    return float(a.mean()), float(a.std(ddof=1)) if len(a) > 1 else 0.0


@dataclass(frozen=True)
class CvSummary:
    metrics: dict
    n_folds: int

    @classmethod
    def from_folds(cls, folds: list[FoldResult]) -> "CvSummary":
        metrics = {}
        for name in METRICS:
            values = [f.metric(name) for f in folds]
            defined = [v for v in values if v is not None]
            if len(defined) < len(values):
                log.info("%s undefined in %d of %d folds", name, len(values) - len(defined), len(values))
            mean, std = _mean_std(defined)
            metrics[name] = MetricSummary(mean, std, len(defined), len(values) - len(defined))
        return cls(metrics, len(folds))

    def mean(self, name: str) -> Optional[float]:
        return self.metrics[name].mean

    def to_dict(self) -> dict:
        return {
            "n_folds": self.n_folds,
            "metrics": {METRIC_NAMES[k]: asdict(v) for k, v in self.metrics.items()},
        }


@dataclass(frozen=True)
class MetricDiff:
    mean: Optional[float]
    std: Optional[float]
    n: int
    t_statistic: Optional[float]
    p_value: Optional[float]
    significant: bool


@dataclass(frozen=True)
class DiffSummary:
    metrics: dict
    n_folds: int
    alpha: float = 0.05

    def to_dict(self) -> dict:
        return {
            "n_folds": self.n_folds,
            "alpha": self.alpha,
            "metrics": {METRIC_NAMES[k]: asdict(v) for k, v in self.metrics.items()},
        }


def paired_difference(diffs, alpha: float = 0.05) -> MetricDiff:
    """Mean and spread of per-fold differences, with a two-sided one-sample t-test."""
    diffs = [float(d) for d in diffs]
    n = len(diffs)
    mean, std = _mean_std(diffs)
    if n < 2:
        return MetricDiff(mean, std, n, None, None, False)
    if std == 0:
        if mean == 0:
            return MetricDiff(mean, std, n, 0.0, 1.0, False)
        return MetricDiff(mean, std, n, math.copysign(math.inf, mean), 0.0, True)
    t = mean / (std / math.sqrt(n))
    p = float(2.0 * stats.t.sf(abs(t), df=n - 1))
    return MetricDiff(mean, std, n, t, p, p < alpha)


def compare(base: list[FoldResult], mitigated: list[FoldResult], alpha: float = 0.05) -> DiffSummary:
    """Per-fold ``mitigated - base`` differences for every metric."""
    if [f.fold_index for f in base] != [f.fold_index for f in mitigated]:
        raise DataError("runs do not cover the same folds")
    for a, b in zip(base, mitigated):
        if a.trace is not None and b.trace is not None and not np.array_equal(a.trace.test_rows, b.trace.test_rows):
            raise DataError(f"fold {a.fold_index} uses different test rows in the two runs")
    metrics = {}
    for name in METRICS:
        diffs = [
            m.metric(name) - b.metric(name)
            for b, m in zip(base, mitigated)
            if b.metric(name) is not None and m.metric(name) is not None
        ]
        metrics[name] = paired_difference(diffs, alpha)
    return DiffSummary(metrics, len(base), alpha)


class ExperimentResult(NamedTuple):
    folds: list
    summary: CvSummary
    curves: list


def fold_seeds(seed: int, fold: int) -> tuple[int, int, int]:
    """Independent seeds for the inner split and the two model fits of a fold."""
    state = np.random.SeedSequence(seed, spawn_key=(fold,)).generate_state(3)
    return tuple(int(s) for s in state)


def outer_folds(ds: LabeledDataset, cfg: ExperimentConfig) -> list[np.ndarray]:
    outer_seed = int(np.random.SeedSequence(cfg.seed).generate_state(1)[0])
    return group_partition(ds.group_ids, SplitSpec((1.0 / cfg.k_folds,) * cfg.k_folds, outer_seed))


def fit_model(ds: LabeledDataset, cfg: ExperimentConfig, seed: int):
    """Fit the configured classifier with its mitigation; returns (model, weights used)."""
    if cfg.mitigation == "reweigh":
        ds = ds.with_weights(reweigh(ds))
    if cfg.classifier == "logistic":
        eta = cfg.eta if cfg.mitigation == "prejudice" else 0.0
        return train_logistic(ds, replace(cfg.logistic, eta=eta)), ds.weights
    return train_forest(ds, replace(cfg.forest, seed=seed)), ds.weights


def _run_fold(ds: LabeledDataset, cfg: ExperimentConfig, i: int, test_rows: np.ndarray):
    inner_seed, train_seed, dev_seed = fold_seeds(cfg.seed, i)
    dev_rows = np.setdiff1d(np.arange(ds.n_rows), test_rows)
    dev, test = ds.subset(dev_rows), ds.subset(test_rows)
    split = SplitSpec((cfg.inner_train_fraction, 1.0 - cfg.inner_train_fraction), inner_seed)
    train_local, val_local = group_partition(dev.group_ids, split)
    train, val = dev.subset(train_local), dev.subset(val_local)
    try:
        model, train_weights = fit_model(train, cfg, train_seed)
        val_scores = model.predict_scores(val.features)
        curve = sweep(val_scores, val.labels, val.protected, cfg.threshold_grid)
        threshold = select_threshold(curve)
        model, dev_weights = fit_model(dev, cfg, dev_seed)
        test_scores = model.predict_scores(test.features)
        conf = confusion_by_group(test.labels, classify(test_scores, threshold), test.protected)
    except DataError as exc:
        log.warning("skipping fold %d: %s", i, exc)
        return None
    trace = FoldTrace(
        test_rows=test_rows,
        train_rows=dev_rows[train_local],
        val_rows=dev_rows[val_local],
        train_weights=np.asarray(train_weights),
        dev_weights=np.asarray(dev_weights),
        val_scores=val_scores,
        test_scores=test_scores,
    )
    result = FoldResult(i, threshold, performance_report(conf), fairness_report(conf), trace)
    return result, curve


def run_experiment(ds: LabeledDataset, cfg: ExperimentConfig, n_jobs: int = 1) -> ExperimentResult:
    """Run the full protocol; folds may run on ``n_jobs`` threads with identical results."""
    parts = outer_folds(ds, cfg)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(lambda i: _run_fold(ds, cfg, i, parts[i]), range(cfg.k_folds)))
    else:
        outcomes = [_run_fold(ds, cfg, i, parts[i]) for i in range(cfg.k_folds)]
    folds = [o[0] for o in outcomes if o is not None]
    curves = [o[1] for o in outcomes if o is not None]
    return ExperimentResult(folds, CvSummary.from_folds(folds), curves)
