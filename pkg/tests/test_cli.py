import csv
import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from fairpsych.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main, sha256


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "synth.json"
    cfg.write_text(json.dumps({"seed": 3, "n_patients": 300, "bias_strength": 0.5}))
    assert run("synth", cfg, root / "bundle") == EXIT_OK
    assert run("featurize", root / "bundle", root / "feat") == EXIT_OK
    feats = root / "feat" / "features.csv"
    assert run("evaluate", feats, root / "base", "--seed", 1) == EXIT_OK
    assert run("evaluate", feats, root / "rw", "--seed", 1, "--mitigation", "reweigh") == EXIT_OK
    assert run("evaluate", feats, root / "pr", "--seed", 1, "--mitigation", "prejudice", "--eta", 25) == EXIT_OK
    assert run("compare", root / "base", root / "rw", root / "cmp") == EXIT_OK
    assert run("report", root / "base", root / "rw", root / "pr", "--out", root / "rep") == EXIT_OK
    return root


def test_synth_outputs(pipeline):
    names = {p.name for p in (pipeline / "bundle").iterdir()}
    assert {"patient.csv", "admissions.csv", "medication.csv", "diagnoses.csv", "aggression.csv",
            "config.json", "counts.json", "manifest.json"} <= names
    counts = json.loads((pipeline / "bundle" / "counts.json").read_text())
    assert counts["man"] + counts["woman"] == counts["admissions"]


def test_manifest_digests(pipeline):
    man = json.loads((pipeline / "feat" / "manifest.json").read_text())
    assert man["command"] == "featurize"
    assert man["outputs"]["features.csv"] == sha256(pipeline / "feat" / "features.csv")
    assert len(man["inputs"]) == 5
    assert "wall_clock_seconds" in man


def test_featurize_outputs(pipeline, tmp_path):
    rows = read_csv(pipeline / "feat" / "features.csv")
    assert len(rows[0]) == 38
    prov = json.loads((pipeline / "feat" / "provenance.json").read_text())
    assert prov["admissions_kept"] == len(rows) - 1
    assert run("featurize", pipeline / "bundle", tmp_path, "--drop-duration") == EXIT_OK
    assert len(read_csv(tmp_path / "features.csv")[0]) == 37
    assert run("evaluate", tmp_path / "features.csv", tmp_path / "ev", "--seed", 1, "--k-folds", 3) == EXIT_OK


def test_evaluate_outputs(pipeline):
    folds = read_csv(pipeline / "base" / "folds.csv")
    assert len(folds) == 6
    assert folds[0][:2] == ["fold", "chosen_threshold"]
    assert len(list((pipeline / "base" / "curves").glob("fold_*.csv"))) == 5
    curve = read_csv(pipeline / "base" / "curves" / "fold_0.csv")
    assert len(curve) == 100
    summary = json.loads((pipeline / "pr" / "summary.json").read_text())
    assert summary["config"]["eta"] == 25.0
    assert summary["config"]["mitigation"] == "prejudice"
    assert summary["n_folds"] == 5
    assert summary["label"] == "logistic+prejudice(eta=25)"


def test_evaluate_is_byte_reproducible(pipeline, tmp_path):
    feats = pipeline / "feat" / "features.csv"
    assert run("evaluate", feats, tmp_path / "again", "--seed", 1, "--jobs", 3) == EXIT_OK
    for name in ("folds.csv", "summary.json", "curves/fold_3.csv"):
        assert (tmp_path / "again" / name).read_bytes() == (pipeline / "base" / name).read_bytes()


def test_compare_outputs(pipeline):
    doc = json.loads((pipeline / "cmp" / "diffs.json").read_text())
    assert doc["baseline"] == "logistic+none"
    assert doc["mitigated"] == "logistic+reweigh"
    di = doc["metrics"]["disparate_impact"]
    assert isinstance(di["significant"], bool)
    assert di["n"] == 5


def test_report_outputs(pipeline):
    rep = pipeline / "rep"
    text = (rep / "report.md").read_text()
    assert "Fairness differences" in text and "RW" in text and "PR" in text
    svgs = sorted(rep.glob("*.svg"))
    assert len(svgs) == 3 * 5 * 2
    for svg in svgs[:4]:
        assert ET.parse(svg).getroot().tag.endswith("svg")


def test_report_is_byte_reproducible(pipeline, tmp_path):
    assert run("report", pipeline / "base", pipeline / "rw", pipeline / "pr", "--out", tmp_path) == EXIT_OK
    for p in (pipeline / "rep").iterdir():
        if p.name != "manifest.json":
            assert (tmp_path / p.name).read_bytes() == p.read_bytes()


def test_exit_codes(pipeline, tmp_path, capsys):
    feats = pipeline / "feat" / "features.csv"
    assert run("synth", tmp_path / "missing.json", tmp_path / "o") == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text('{"seed": 1, "n_patient": 3}')
    assert run("synth", bad, tmp_path / "o") == EXIT_USAGE
    assert run("featurize", tmp_path / "nowhere", tmp_path / "o") == EXIT_DATA
    assert run("evaluate", feats, tmp_path / "o", "--classifier", "forest", "--mitigation", "prejudice") == EXIT_USAGE
    assert run("evaluate", tmp_path / "nope.csv", tmp_path / "o") == EXIT_DATA
    assert run("compare", pipeline / "base", tmp_path / "none", tmp_path / "o") == EXIT_DATA
    with pytest.raises(SystemExit) as err:
        run("frobnicate")
    assert err.value.code == EXIT_USAGE
    assert "data error" in capsys.readouterr().err


def test_compare_rejects_unpaired_runs(pipeline, tmp_path):
    feats = pipeline / "feat" / "features.csv"
    assert run("evaluate", feats, tmp_path / "other", "--seed", 2) == EXIT_OK
    assert run("compare", pipeline / "base", tmp_path / "other", tmp_path / "o") == EXIT_DATA


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "fairpsych", "--version"], capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.strip().startswith("fairpsych ")
