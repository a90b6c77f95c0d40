"""Markdown tables and per-fold figures for a set of evaluation runs."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from .evaluate import DiffSummary, compare
from .plotting import plot_sweep
from .results import Run

CLF_ABBR = {"logistic": "LR", "forest": "RF"}
MIT_ABBR = {"none": "", "reweigh": "RW", "prejudice": "PR"}
PERFORMANCE_COLUMNS = (("balanced_accuracy", "Balanced accuracy"), ("f1", "F1"))
FAIRNESS_COLUMNS = (("di", "DI"), ("aod", "AOD"), ("spd", "SPD"), ("eod", "EOD"))


def fmt(mean: Optional[float], std: Optional[float]) -> str:
    if mean is None:
        return "undefined"
    return f"{mean:.3f} ± {std:.3f}"


def _mit(run: Run) -> str:
    abbr = MIT_ABBR[run.config.mitigation]
    if run.config.mitigation == "prejudice":
        abbr += f" (η={run.config.eta:g})"
    return abbr


def _table(header: list[str], rows: list[list[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines)


def summary_table(runs: list[Run], columns) -> str:
    rows = []
    for run in runs:
        cells = [fmt(run.summary.metrics[k].mean, run.summary.metrics[k].std) for k, _ in columns]
        rows.append([CLF_ABBR[run.config.classifier], _mit(run), *cells])
    return _table(["Clf.", "Mit.", *(title for _, title in columns)], rows)


def diff_table(pairs: list[tuple[Run, DiffSummary]], columns) -> str:
    """Mean ± std of per-fold differences; significant cells are bold."""
    rows = []
    for run, diff in pairs:
        cells = []
        for k, _ in columns:
            d = diff.metrics[k]
            cell = fmt(d.mean, d.std)
            cells.append(f"**{cell}**" if d.significant else cell)
        rows.append([CLF_ABBR[run.config.classifier], _mit(run), *cells])
    return _table(["Clf.", "Mit.", *(f"Δ{title}" for _, title in columns)], rows)


def find_baseline(run: Run, runs: list[Run]) -> Optional[Run]:
    """The unmitigated run sharing classifier, seed and fold layout with ``run``."""
    for other in runs:
        c, o = run.config, other.config
        if (o.mitigation == "none" and o.classifier == c.classifier and o.seed == c.seed
                and o.k_folds == c.k_folds and o.inner_train_fraction == c.inner_train_fraction):
            return other
    return None


def paired_diffs(runs: list[Run]) -> list[tuple[Run, DiffSummary]]:
    pairs = []
    for run in runs:
        if run.config.mitigation == "none":
            continue
        base = find_baseline(run, runs)
        if base is not None:
            pairs.append((run, compare(base.folds, run.folds)))
    return pairs


def render_markdown(runs: list[Run], figures: dict[str, list[str]]) -> str:
    parts = ["# Evaluation report", ""]
    parts += ["## Runs", ""]
    for run in runs:
        parts.append(f"- `{run.path}`: {run.label}, seed {run.config.seed}, {run.summary.n_folds} folds")
    parts += ["", "## Performance (mean ± std over folds)", "", summary_table(runs, PERFORMANCE_COLUMNS)]
    parts += ["", "## Fairness (mean ± std over folds)", "", summary_table(runs, FAIRNESS_COLUMNS)]
    pairs = paired_diffs(runs)
    if pairs:
        note = "Per-fold differences, mitigated minus baseline. Bold: significant at the 95% level (two-sided t-test)."
        parts += ["", "## Performance differences", "", note, "", diff_table(pairs, PERFORMANCE_COLUMNS)]
        parts += ["", "## Fairness differences", "", note, "", diff_table(pairs, FAIRNESS_COLUMNS)]
    if any(figures.values()):
        parts += ["", "## Validation sweeps", ""]
        for label, files in figures.items():
            parts.append(f"- {label}: " + ", ".join(f"[{name}]({name})" for name in files))
    return "\n".join(parts) + "\n"


def write_report(runs: list[Run], out_dir: Path) -> list[Path]:
    """Write report.md and two SVGs per fold and run; returns the files written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written, figures = [], {}
    for r, run in enumerate(runs):
        names = []
        for fold in run.folds:
            curve = run.curves.get(fold.fold_index)
            if curve is None:
                continue
            for fairness in ("di_error", "aod"):
                name = f"run{r}_fold{fold.fold_index}_{fairness}.svg"
                title = f"{run.label}, fold {fold.fold_index}"
                written.append(plot_sweep(curve, fold.chosen_threshold, fairness, out_dir / name, title))
                names.append(name)
        figures[f"{run.label} ({run.path.name})"] = names
    md = out_dir / "report.md"
    md.write_text(render_markdown(runs, figures), encoding="utf-8")
    return [md, *written]
