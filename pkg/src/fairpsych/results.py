"""On-disk layout of an evaluation run.

A run directory holds ``folds.csv`` (one row per fold), ``summary.json``
(config echo plus mean and std per metric) and ``curves/fold_<i>.csv``
(the validation sweep of fold i). Undefined metric values are empty CSV
cells and JSON nulls.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .dataset import DataError
from .evaluate import METRICS, CvSummary, ExperimentConfig, ExperimentResult, FoldResult, MetricSummary, SweepCurve
from .fairness import METRIC_NAMES, FairnessReport, PerformanceReport

FOLD_FIELDS = ("fold", "chosen_threshold") + tuple(METRIC_NAMES.values())
CURVE_FIELDS = ("threshold", "balanced_accuracy", "disparate_impact_error", "average_odds_difference")
_SHORT = {v: k for k, v in METRIC_NAMES.items()}


def _cell(v: Optional[float]) -> str:
    return "" if v is None else repr(float(v))


def _value(text: str) -> Optional[float]:
    if text == "":
        return None
    v = float(text)
    if not math.isfinite(v):
        raise DataError(f"non-finite value {text!r}")
    return v


def _write_rows(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _read_rows(path: Path, header) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != list(header):
            raise DataError(f"{path}: unexpected header")
        return list(reader)


def write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_folds(path: Path, folds: list[FoldResult]) -> None:
    rows = []
    for f in folds:
        row = [str(f.fold_index), repr(f.chosen_threshold)]
        row += [_cell(f.metric(_SHORT[name])) for name in METRIC_NAMES.values()]
        rows.append(row)
    _write_rows(path, FOLD_FIELDS, rows)


def read_folds(path: Path) -> list[FoldResult]:
    folds = []
    for row in _read_rows(path, FOLD_FIELDS):
        vals = {_SHORT[name]: _value(cell) for name, cell in zip(FOLD_FIELDS[2:], row[2:])}
        folds.append(FoldResult(
            fold_index=int(row[0]),
            chosen_threshold=float(row[1]),
            performance=PerformanceReport(vals["balanced_accuracy"], vals["f1"]),
            fairness=FairnessReport(vals["spd"], vals["di"], vals["di_error"], vals["eod"], vals["aod"]),
        ))
    return folds


def write_curve(path: Path, curve: SweepCurve) -> None:
    rows = [
        [repr(t), _cell(b), _cell(d), _cell(a)]
        for t, b, d, a in zip(curve.thresholds, curve.balanced_accuracy, curve.di_error, curve.aod)
    ]
    _write_rows(path, CURVE_FIELDS, rows)


def read_curve(path: Path) -> SweepCurve:
    rows = _read_rows(path, CURVE_FIELDS)
    cols = list(zip(*rows)) if rows else [(), (), (), ()]
    return SweepCurve(
        tuple(float(t) for t in cols[0]),
        tuple(_value(v) for v in cols[1]),
        tuple(_value(v) for v in cols[2]),
        tuple(_value(v) for v in cols[3]),
    )


def summary_document(cfg: ExperimentConfig, summary: CvSummary) -> dict:
    return {"label": cfg.label, "config": cfg.to_dict(), **summary.to_dict()}


def write_run(out_dir: Path, cfg: ExperimentConfig, result: ExperimentResult) -> list[Path]:
    """Write one run; returns the files written."""
    out_dir = Path(out_dir)
    written = [out_dir / "folds.csv", out_dir / "summary.json"]
    write_folds(written[0], result.folds)
    write_json(written[1], summary_document(cfg, result.summary))
    for fold, curve in zip(result.folds, result.curves):
        path = out_dir / "curves" / f"fold_{fold.fold_index}.csv"
        write_curve(path, curve)
        written.append(path)
    return written


@dataclass(frozen=True)
class Run:
    """A run read back from disk."""

    path: Path
    config: ExperimentConfig
    summary: CvSummary
    folds: list
    curves: dict

    @property
    def label(self) -> str:
        return self.config.label


def read_run(run_dir: Path) -> Run:
    run_dir = Path(run_dir)
    for name in ("folds.csv", "summary.json"):
        if not (run_dir / name).is_file():
            raise FileNotFoundError(f"{run_dir / name} not found")
    doc = json.loads((run_dir / "summary.json").read_text(encoding="utf-8"))
    cfg = ExperimentConfig.from_dict(doc["config"])
    stored = {_SHORT[name]: MetricSummary(**m) for name, m in doc["metrics"].items()}
    metrics = {k: stored[k] for k in METRICS}
    folds = read_folds(run_dir / "folds.csv")
    curves = {}
    for f in folds:
        path = run_dir / "curves" / f"fold_{f.fold_index}.csv"
        if path.is_file():
            curves[f.fold_index] = read_curve(path)
    return Run(run_dir, cfg, CvSummary(metrics, doc["n_folds"]), folds, curves)
