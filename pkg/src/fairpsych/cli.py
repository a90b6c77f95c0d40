"""Command-line entry point: ``fairpsych <command> ...``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error.
Every command finishes by writing ``manifest.json`` into its output
directory, atomically and after all other outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .dataset import DataError, write_csv
from .ehr import read_bundle, write_bundle
from .evaluate import CLASSIFIERS, MITIGATIONS, ExperimentConfig, compare, run_experiment
from .featurize import assemble, load_features, to_dataset
from .report import write_report
from .results import read_run, write_json, write_run
from .synth import SynthConfig, generate, summarize

log = logging.getLogger("fairpsych")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3


class ConfigError(Exception):
    pass


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _input_files(paths) -> list[Path]:
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            files += sorted(f for f in p.rglob("*") if f.is_file() and f.name != "manifest.json")
        elif p.is_file():
            files.append(p)
    return files


def write_manifest(out_dir: Path, command: str, config: dict, seed, inputs, outputs, started: float) -> Path:
    out_dir = Path(out_dir)
    doc = {
        "tool": "fairpsych",
        "version": __version__,
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {str(p): sha256(p) for p in _input_files(inputs)},
        "outputs": {str(Path(p).relative_to(out_dir)): sha256(p) for p in outputs},
        "wall_clock_seconds": round(time.perf_counter() - started, 3),
    }
    fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=".manifest-", suffix=".json")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    target = out_dir / "manifest.json"
    os.replace(tmp, target)
    return target


def load_json_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return doc


def cmd_synth(args) -> int:
    started = time.perf_counter()
    try:
        cfg = SynthConfig.from_dict(load_json_config(args.config))
    except (DataError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    out = Path(args.out_dir)
    bundle = generate(cfg)
    outputs = write_bundle(bundle, out)
    (out / "config.json").write_text(cfg.to_json(), encoding="utf-8")
    outputs.append(out / "config.json")
    write_json(out / "counts.json", summarize(bundle))
    outputs.append(out / "counts.json")
    write_manifest(out, "synth", cfg.to_dict(), cfg.seed, [args.config], outputs, started)
    return EXIT_OK


def cmd_featurize(args) -> int:
    started = time.perf_counter()
    out = Path(args.out_dir)
    bundle = read_bundle(args.in_dir)
    table, _, prov = assemble(bundle, drop_duration=args.drop_duration, primary_dates_only=args.primary_dates_only)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(table, out / "features.csv")
    write_json(out / "provenance.json", prov.to_dict())
    flags = {"drop_duration": args.drop_duration, "primary_dates_only": args.primary_dates_only}
    inputs = [Path(args.in_dir) / f"{name}.csv" for name in bundle.tables()]
    write_manifest(out, "featurize", flags, None, inputs,
                   [out / "features.csv", out / "provenance.json"], started)
    return EXIT_OK


def experiment_config(args) -> ExperimentConfig:
    doc = load_json_config(args.config)
    overrides = {
        "classifier": args.classifier,
        "mitigation": args.mitigation,
        "eta": args.eta,
        "seed": args.seed,
        "k_folds": args.k_folds,
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = ExperimentConfig.from_dict(doc)
        if args.n_trees is not None:
            cfg = replace(cfg, forest=replace(cfg.forest, n_trees=args.n_trees))
    except (DataError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    cfg = experiment_config(args)
    ds = to_dataset(load_features(args.features))
    result = run_experiment(ds, cfg, n_jobs=args.jobs)
    if not result.folds:
        raise DataError("every fold was skipped")
    out = Path(args.out_dir)
    outputs = write_run(out, cfg, result)
    write_manifest(out, "evaluate", cfg.to_dict(), cfg.seed, [args.features, args.config] if args.config else [args.features],
                   outputs, started)
    return EXIT_OK


def cmd_compare(args) -> int:
    started = time.perf_counter()
    base, mitigated = read_run(args.baseline), read_run(args.mitigated)
    if (base.config.seed, base.config.k_folds) != (mitigated.config.seed, mitigated.config.k_folds):
        raise DataError("runs do not share seed and fold count, so their folds are not paired")
    diff = compare(base.folds, mitigated.folds)
    out = Path(args.out_dir)
    doc = {"baseline": base.label, "mitigated": mitigated.label, **diff.to_dict()}
    write_json(out / "diffs.json", doc)
    inputs = [Path(d) / n for d in (args.baseline, args.mitigated) for n in ("folds.csv", "summary.json")]
    write_manifest(out, "compare", {"alpha": diff.alpha}, base.config.seed, inputs, [out / "diffs.json"], started)
    return EXIT_OK


def cmd_report(args) -> int:
    started = time.perf_counter()
    runs = [read_run(d) for d in args.run_dirs]
    out = Path(args.out_dir)
    outputs = write_report(runs, out)
    write_manifest(out, "report", {"runs": [str(r.path) for r in runs]}, None, args.run_dirs, outputs, started)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairpsych", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic EHR bundle")
    p.add_argument("config", help="JSON file with SynthConfig fields")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("featurize", help="build features.csv from a bundle directory")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--drop-duration", "--drop_duration", action="store_true", help="omit the duration column")
    p.add_argument("--primary-dates-only", action="store_true",
                   help="ignore diagnoses without a recorded diagnosis date in the one-hot columns")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("evaluate", help="grouped cross-validation of one classifier and mitigation")
    p.add_argument("features", help="features.csv written by featurize")
    p.add_argument("out_dir")
    p.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    p.add_argument("--classifier", choices=CLASSIFIERS)
    p.add_argument("--mitigation", choices=MITIGATIONS)
    p.add_argument("--eta", type=float, help="prejudice remover strength")
    p.add_argument("--seed", type=int)
    p.add_argument("--k-folds", type=int)
    p.add_argument("--n-trees", type=int)
    p.add_argument("--jobs", type=int, default=1, help="folds run on this many threads")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="paired per-fold differences of two runs")
    p.add_argument("baseline")
    p.add_argument("mitigated")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="markdown tables and SVG sweeps for runs")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--out", dest="out_dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"fairpsych {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, NotADirectoryError) as exc:
        print(f"fairpsych {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
