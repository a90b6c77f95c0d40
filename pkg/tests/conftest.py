import datetime as dt

import numpy as np
import pytest

from fairpsych.dataset import LabeledDataset, Table
from fairpsych.ehr import SCHEMAS, RawEhrBundle
from fairpsych.featurize import assemble, to_dataset
from fairpsych.synth import SynthConfig, generate

D0 = dt.date(2020, 1, 1)
T0 = dt.time(9, 0, 0)


def day(n: int) -> dt.date:
    return D0 + dt.timedelta(days=n)


def admission(aid, pid, *, ward="CAPD", start=0, duration=30, status="Discharged", gender="man",
              emergency=False, first=True, age=40):
    discharged = status == "Discharged"
    return (aid, pid, ward, day(start), day(start + duration) if discharged else None, T0,
            T0 if discharged else None, emergency, first, gender, age, status, duration)


def medication(pid, rx, drug, dose, when, *, administered=True):
    return (pid, rx, "N05BA01", drug, dose, "mg", None if when is None else day(when), T0,
            administered, dose, dose, False, not administered)


def diagnosis(pid, no, group, *, start=-100, end=200, diag_date=2, demand=3.0, multiple=False,
              personality=False):
    return (pid, no, None if start is None else day(start), None if end is None else day(end), group,
            demand, multiple, personality, True, None if diag_date is None else day(diag_date))


def bundle(admissions=(), medication=(), diagnoses=(), aggression=(), patients=()):
    rows = dict(admissions=admissions, medication=medication, diagnoses=diagnoses,
                aggression=aggression, patient=patients)
    return RawEhrBundle(**{k: Table(k, SCHEMAS[k], v) for k, v in rows.items()})


def random_dataset(rng, n, d=3, both_groups=True):
    X = rng.normal(size=(n, d))
    y = rng.integers(0, 2, n)
    s = rng.integers(0, 2, n)
    if both_groups:
        s[0], s[1] = 0, 1
        y[0], y[1] = 0, 1
    return LabeledDataset(X, [f"x{i}" for i in range(d)], y, s)


@pytest.fixture(scope="session")
def small_bundle():
    return generate(SynthConfig(seed=11, n_patients=300, bias_strength=0.5))


@pytest.fixture(scope="session")
def small_features(small_bundle):
    return assemble(small_bundle)


@pytest.fixture(scope="session")
def small_ds(small_features):
    return to_dataset(small_features[0])


@pytest.fixture(scope="session")
def biased_ds():
    return to_dataset(assemble(generate(SynthConfig(seed=5, n_patients=1500, bias_strength=0.5)))[0])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    verdicts = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            name = rep.nodeid.rpartition("::")[2]
            if "test_acceptance.py" in rep.nodeid and name.startswith("test_criterion_"):
                if outcome == "passed" and rep.when != "call":
                    continue
                verdicts[name] = "PASS" if outcome == "passed" else "FAIL"
    if verdicts:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name in sorted(verdicts, key=lambda n: int(n.split("_")[2])):
            number, _, title = name[len("test_criterion_"):].partition("_")
            terminalreporter.write_line(f"criterion {number} ({title.replace('_', ' ')}): {verdicts[name]}")
