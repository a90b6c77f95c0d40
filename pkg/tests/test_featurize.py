import datetime as dt
from collections import defaultdict

import numpy as np
import pytest

from fairpsych.dataset import DataError, Table
from fairpsych.ehr import ADMISSIONS, DIAGNOSIS_GROUPS, WARDS
from fairpsych.featurize import (
    DEFAULT_MULTIPLIERS,
    DURATION_COL,
    FEATURE_COLUMNS,
    DoseTable,
    UnknownDrugError,
    assemble,
    diazepam_equivalent,
    filter_admissions,
    resolve_diagnosis_date,
)

from conftest import D0, admission, bundle, day, diagnosis, medication

REFERENCE_MULTIPLIERS = {
    "Diazepam": 1.0, "Alprazolam": 10.0, "Bromazepam": 1.0, "Brotizolam": 40.0, "Chlordiazepoxide": 0.5,
    "Clobazam": 0.5, "Clorazepate potassium": 0.75, "Flunitrazepam": 0.1, "Flurazepam": 0.33,
    "Lorazepam": 5.0, "Lormetazepam": 10.0, "Midazolam": 1.33, "Nitrazepam": 1.0, "Oxazepam": 0.33,
    "Temazepam": 1.0, "Zolpidem": 1.0, "Zopiclone": 1.33,
}


def one_patient(admissions, meds=(), diags=(), incidents=()):
    return bundle(admissions=admissions, medication=meds, diagnoses=diags, aggression=incidents,
                  patients=[("P1", 25)])


def row_of(table, i=0):
    return dict(zip(table.column_names, table.rows[i]))


def test_default_table_matches_reference():
    assert DEFAULT_MULTIPLIERS == REFERENCE_MULTIPLIERS
    assert len(DoseTable().entries) == 17


@pytest.mark.parametrize("drug, dose, expected", [
    ("Diazepam", 5, 5.0), ("Lorazepam", 2, 10.0), ("Oxazepam", 30, 9.9), ("Temazepam", 0, 0.0),
])
def test_diazepam_equivalent_examples(drug, dose, expected):
    assert diazepam_equivalent(drug, dose) == pytest.approx(expected, abs=1e-12)


def test_lookup_is_case_insensitive():
    assert diazepam_equivalent("LORAZEPAM", 1.0) == 5.0
    assert diazepam_equivalent(" lorazepam ", 1.0) == 5.0


def test_unknown_drug_and_extension():
    with pytest.raises(UnknownDrugError):
        diazepam_equivalent("Haloperidol", 5.0)
    table = DoseTable().extended({"Ketazolam": 0.5})
    assert diazepam_equivalent("ketazolam", 4.0, table) == 2.0
    with pytest.raises(DataError):
        diazepam_equivalent("Diazepam", -1.0)
    with pytest.raises(DataError):
        DoseTable({"X": 0.0})


def test_filter_admissions_boundary_and_status():
    rows = [
        admission("A1", "P1", duration=14),
        admission("A2", "P1", duration=13),
        admission("A3", "P1", duration=40, status="Ongoing"),
        admission("A4", "P1", duration=20),
        admission("A5", "P1", duration=5, status="Ongoing"),
    ]
    kept = filter_admissions(Table("admissions", ADMISSIONS, rows))
    assert kept.column("Admission ID") == ["A1", "A4"]


def test_filter_admissions_requires_columns():
    with pytest.raises(DataError):
        filter_admissions(Table("x", ADMISSIONS[:3]))


@pytest.mark.parametrize("record, expected", [
    ({"Diagnosis date": dt.date(2020, 1, 5), "End date": dt.date(2020, 2, 1), "Start date": dt.date(2019, 12, 1)},
     (dt.date(2020, 1, 5), "primary")),
    ({"Diagnosis date": None, "End date": dt.date(2020, 2, 1), "Start date": dt.date(2019, 12, 1)},
     (dt.date(2020, 2, 1), "end_fallback")),
    ({"Diagnosis date": None, "End date": None, "Start date": dt.date(2019, 12, 1)},
     (dt.date(2019, 12, 1), "start_fallback")),
])
def test_resolve_diagnosis_date(record, expected):
    assert resolve_diagnosis_date(record) == expected


def test_resolve_diagnosis_date_all_missing():
    with pytest.raises(DataError):
        resolve_diagnosis_date({"Diagnosis date": None, "End date": None, "Start date": None})


def test_hand_built_windowing():
    b = one_patient(
        [admission("A1", "P1", duration=30)],
        [medication("P1", "R1", "Lorazepam", 2.0, 3), medication("P1", "R2", "Diazepam", 5.0, 20)],
    )
    table, target, _ = assemble(b)
    row = row_of(table)
    assert row["Past diazepam-equivalent dose"] == 10.0
    assert row["Future diazepam-equivalent dose"] == 5.0
    assert target.tolist() == [1]


def test_only_early_use_gives_target_zero():
    b = one_patient(
        [admission("A1", "P1", duration=30)],
        [medication("P1", "R1", "Diazepam", 5.0, d) for d in range(0, 14)],
    )
    table, target, _ = assemble(b)
    assert row_of(table)["Past diazepam-equivalent dose"] == 70.0
    assert target.tolist() == [0]


def test_window_edges_and_exclusions():
    b = one_patient(
        [admission("A1", "P1", duration=30)],
        [
            medication("P1", "R1", "Diazepam", 1.0, 13),
            medication("P1", "R2", "Diazepam", 2.0, 14),
            medication("P1", "R3", "Diazepam", 4.0, 30),
            medication("P1", "R4", "Diazepam", 8.0, 31),
            medication("P1", "R5", "Diazepam", 16.0, -1),
            medication("P1", "R6", "Diazepam", 32.0, 20, administered=False),
            medication("P1", "R7", "Diazepam", 64.0, None),
        ],
    )
    table, target, prov = assemble(b)
    row = row_of(table)
    assert row["Past diazepam-equivalent dose"] == 1.0
    assert row["Future diazepam-equivalent dose"] == 6.0
    assert prov.dropped_dateless_medication == 1
    assert prov.not_administered_rows == 1


def test_unknown_drug_in_bundle_raises():
    b = one_patient([admission("A1", "P1")], [medication("P1", "R1", "Haloperidol", 5.0, 2)])
    with pytest.raises(UnknownDrugError):
        assemble(b)


def test_outside_ward_gives_zero_ward_columns():
    b = one_patient([admission("A1", "P1", ward="SOM"), admission("A2", "P1", ward="CAIC", start=100)])
    table, _, _ = assemble(b)
    ward_cols = [f"Nursing ward: {w}" for w in WARDS.values()]
    first, second = row_of(table, 0), row_of(table, 1)
    assert [first[c] for c in ward_cols] == [False] * 4
    assert [second[c] for c in ward_cols] == [False, True, False, False]


def test_diagnoses_incidents_and_care_demand():
    b = one_patient(
        [admission("A1", "P1", duration=30, start=0)],
        diags=[
            diagnosis("P1", "D1", "Anxiety disorders", diag_date=13, demand=2.0),
            diagnosis("P1", "D2", "Bipolar Disorders", diag_date=14, demand=6.0, personality=True),
            diagnosis("P1", "D3", "Depressive Disorders", diag_date=None, end=5, demand=4.0, multiple=True),
            diagnosis("P1", "D4", "Cognitive disorders", diag_date=None, start=-400, end=-300, demand=9.0),
        ],
        incidents=[("P1", day(-3), None), ("P1", day(0), None), ("P1", day(13), None), ("P1", day(14), None)],
    )
    table, _, prov = assemble(b)
    row = row_of(table)
    flagged = {g for g in DIAGNOSIS_GROUPS if row[f"Diagnosis: {g}"]}
    assert flagged == {"Anxiety disorders", "Depressive Disorders"}
    assert row["Minimum level of care demand"] == 2.0
    assert row["Maximum level of care demand"] == 6.0
    assert row["Multiple problem"] is True
    assert row["Personality disorder"] is True
    assert row["Incidents before admission"] == 1
    assert row["Incidents during admission"] == 2
    assert row["Age at start of dossier"] == 25
    assert prov.date_provenance["end_fallback"] == 2

    primary, _, _ = assemble(b, primary_dates_only=True)
    prow = row_of(primary)
    assert {g for g in DIAGNOSIS_GROUPS if prow[f"Diagnosis: {g}"]} == {"Anxiety disorders"}


def test_feature_layout_and_invariants(small_features):
    table, target, _ = small_features
    assert table.column_names == [c.name for c in FEATURE_COLUMNS]
    assert len(table.column_names) == 38
    recs = table.records()
    for rec, t in zip(recs, target):
        assert rec["Duration in days"] >= 14
        assert rec["Past diazepam-equivalent dose"] >= 0
        assert (rec["Future diazepam-equivalent dose"] > 0) == bool(t)
        assert sum(rec[f"Nursing ward: {w}"] for w in WARDS.values()) in (0, 1)
    keys = [(r["Patient ID"],) for r in recs]
    assert keys == sorted(keys)


def test_drop_duration(small_bundle):
    table, _, prov = assemble(small_bundle, drop_duration=True)
    assert len(table.column_names) == 37
    assert DURATION_COL not in table.column_names
    assert prov.dropped_duration


def test_dose_conservation(small_bundle, small_features):
    table, _, _ = small_features
    given = defaultdict(list)
    for rec in small_bundle.medication.records():
        if rec["Administered"] is True and rec["Administration date"] is not None:
            given[rec["Patient ID"]].append((rec["Administration date"], rec["Dose"] * REFERENCE_MULTIPLIERS[rec["Medication name"]]))
    adm = {(r["Patient ID"], r["Admission date"]): r for r in small_bundle.admissions.records()}
    for rec in table.records():
        matches = [a for (pid, _), a in adm.items() if pid == rec["Patient ID"]
                   and a["Duration in days"] == rec["Duration in days"] and a["Age at admission"] == rec["Age at admission"]]
        a = matches[0]
        total = sum(q for d, q in given[rec["Patient ID"]] if a["Admission date"] <= d <= a["Discharge date"])
        both = rec["Past diazepam-equivalent dose"] + rec["Future diazepam-equivalent dose"]
        assert both == pytest.approx(total, rel=1e-12, abs=1e-12)


def test_dateless_rows_counted_independently(small_bundle, small_features):
    _, _, prov = small_features
    assert prov.dropped_dateless_medication == small_bundle.medication.column("Administration date").count(None)
    assert prov.dropped_dateless_medication >= 1


def test_assemble_is_pure(small_bundle, small_features):
    table, target, prov = assemble(small_bundle)
    assert table == small_features[0]
    assert np.array_equal(target, small_features[1])
    assert prov.to_dict() == small_features[2].to_dict()


def test_primary_dates_only_changes_diagnosis_columns_only(small_bundle, small_features):
    base = small_features[0]
    other, target, _ = assemble(small_bundle, primary_dates_only=True)
    assert np.array_equal(target, small_features[1])
    changed = set()
    for j, name in enumerate(base.column_names):
        if [r[j] for r in base.rows] != [r[j] for r in other.rows]:
            changed.add(name)
    assert changed
    assert all(name.startswith("Diagnosis: ") for name in changed)


def test_date_anchor():
    assert day(0) == D0
