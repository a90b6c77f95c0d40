"""Build the per-admission feature table and binary target from a raw bundle."""

from __future__ import annotations

import csv
import datetime as dt
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .dataset import Column, DataError, LabeledDataset, Table, load_csv, to_labeled
from .ehr import DIAGNOSIS_GROUPS, GENDERS, WARDS, RawEhrBundle

WINDOW_DAYS = 14
MIN_DURATION_DAYS = 14

# mg diazepam per mg of drug.
DEFAULT_MULTIPLIERS = {
    "Diazepam": 1.0,
    "Alprazolam": 10.0,
    "Bromazepam": 1.0,
    "Brotizolam": 40.0,
    "Chlordiazepoxide": 0.5,
    "Clobazam": 0.5,
    "Clorazepate potassium": 0.75,
    "Flunitrazepam": 0.1,
    "Flurazepam": 0.33,
    "Lorazepam": 5.0,
    "Lormetazepam": 10.0,
    "Midazolam": 1.33,
    "Nitrazepam": 1.0,
    "Oxazepam": 0.33,
    "Temazepam": 1.0,
    "Zolpidem": 1.0,
    "Zopiclone": 1.33,
}


class UnknownDrugError(DataError):
    pass


@dataclass(frozen=True)
class DoseTable:
    entries: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_MULTIPLIERS))

    def __post_init__(self):
        lowered = {}
        for name, mult in self.entries.items():
            if not mult > 0:
                raise DataError(f"multiplier for {name!r} must be positive")
            lowered[name.strip().lower()] = float(mult)
        object.__setattr__(self, "_lookup", lowered)

    def multiplier(self, drug: str) -> float:
        try:
            return self._lookup[drug.strip().lower()]
        except KeyError:
            raise UnknownDrugError(
                f"no diazepam multiplier for {drug!r}; extend the DoseTable to convert it"
            ) from None

    def extended(self, extra: Mapping[str, float]) -> "DoseTable":
        return DoseTable({**self.entries, **extra})


def diazepam_equivalent(drug: str, dose_mg: float, table: DoseTable | None = None) -> float:
    if dose_mg < 0:
        raise DataError(f"negative dose {dose_mg} for {drug!r}")
    table = table or DoseTable()
    return dose_mg * table.multiplier(drug)


def filter_admissions(admissions: Table) -> Table:
    """Completed admissions lasting at least 14 days, in input order."""
    status = admissions.index("Admission status")
    duration = admissions.index("Duration in days")
    rows = [
        r for r in admissions.rows
        if r[status] is not None
        and r[status].lower() == "discharged"
        and r[duration] is not None
        and r[duration] >= MIN_DURATION_DAYS
    ]
    return Table(admissions.name, admissions.columns, rows)


def resolve_diagnosis_date(record: Mapping) -> tuple[dt.date, str]:
    """Diagnosis date, falling back to the trajectory end date, then start date.

    Returns the date and a provenance tag: ``primary``, ``end_fallback`` or
    ``start_fallback``.
    """
    if record.get("Diagnosis date") is not None:
        return record["Diagnosis date"], "primary"
    if record.get("End date") is not None:
        return record["End date"], "end_fallback"
    if record.get("Start date") is not None:
        return record["Start date"], "start_fallback"
    raise DataError(f"diagnosis {record.get('Diagnosis number')!r} has no usable date")


FEATURE_COLUMNS = (
    Column("Patient ID", "identifier"),
    Column("Emergency", "boolean"),
    Column("First admission", "boolean"),
    Column("Gender", "categorical", GENDERS),
    Column("Age at admission", "integer"),
    Column("Duration in days", "integer"),
    Column("Age at start of dossier", "integer"),
    Column("Incidents during admission", "integer"),
    Column("Incidents before admission", "integer"),
    Column("Multiple problem", "boolean"),
    Column("Personality disorder", "boolean"),
    Column("Minimum level of care demand", "float"),
    Column("Maximum level of care demand", "float"),
    Column("Past diazepam-equivalent dose", "float"),
    Column("Future diazepam-equivalent dose", "float"),
    *(Column(f"Nursing ward: {ward}", "boolean") for ward in WARDS.values()),
    *(Column(f"Diagnosis: {group}", "boolean") for group in DIAGNOSIS_GROUPS),
)

PATIENT_COL = "Patient ID"
GENDER_COL = "Gender"
TARGET_DOSE_COL = "Future diazepam-equivalent dose"
DURATION_COL = "Duration in days"


@dataclass
class Provenance:
    admissions_in: int = 0
    admissions_kept: int = 0
    medication_rows: int = 0
    dropped_dateless_medication: int = 0
    not_administered_rows: int = 0
    date_provenance: Counter = field(default_factory=Counter)
    primary_dates_only: bool = False
    dropped_duration: bool = False

    def to_dict(self) -> dict:
        return {
            "admissions_in": self.admissions_in,
            "admissions_kept": self.admissions_kept,
            "medication_rows": self.medication_rows,
            "dropped_dateless_medication": self.dropped_dateless_medication,
            "not_administered_rows": self.not_administered_rows,
            "diagnosis_date_provenance": {
                tag: self.date_provenance.get(tag, 0)
                for tag in ("primary", "end_fallback", "start_fallback")
            },
            "primary_dates_only": self.primary_dates_only,
            "dropped_duration": self.dropped_duration,
        }


def assemble(
    bundle: RawEhrBundle,
    dose_table: DoseTable | None = None,
    *,
    drop_duration: bool = False,
    primary_dates_only: bool = False,
) -> tuple[Table, np.ndarray, Provenance]:
    """One feature row per qualifying admission, plus the binary target.

    Rows are ordered by (patient ID, admission date). The target is 1 iff any
    benzodiazepine is administered after the first 14 days of the admission.
    With ``primary_dates_only`` diagnoses lacking a recorded diagnosis date
    are ignored for the diagnosis-group indicators.
    """
    dose_table = dose_table or DoseTable()
    bundle.check_integrity()
    prov = Provenance(primary_dates_only=primary_dates_only, dropped_duration=drop_duration)
    prov.admissions_in = bundle.admissions.n_rows

    admissions = filter_admissions(bundle.admissions).records()
    admissions.sort(key=lambda r: (r["Patient ID"], r["Admission date"], r["Admission ID"]))
    prov.admissions_kept = len(admissions)

    doses = defaultdict(list)
    prov.medication_rows = bundle.medication.n_rows
    for rec in bundle.medication.records():
        if rec["Administration date"] is None:
            prov.dropped_dateless_medication += 1
            continue
        if rec["Administered"] is not True:
            prov.not_administered_rows += 1
            continue
        if rec["Dose"] is None or rec["Medication name"] is None:
            raise DataError(f"administered medication row for {rec['Patient ID']} lacks drug or dose")
        eq = diazepam_equivalent(rec["Medication name"], rec["Dose"], dose_table)
        doses[rec["Patient ID"]].append((rec["Administration date"], eq))

    diagnoses = defaultdict(list)
    for rec in bundle.diagnoses.records():
        date, tag = resolve_diagnosis_date(rec)
        prov.date_provenance[tag] += 1
        diagnoses[rec["Patient ID"]].append((date, tag, rec))

    incidents = defaultdict(list)
    for pid, date in zip(bundle.aggression.column("Patient ID"), bundle.aggression.column("Date of incident")):
        if date is not None:
            incidents[pid].append(date)

    dossier_age = dict(zip(bundle.patient.column("Patient ID"), bundle.patient.column("Age at start of dossier")))

    columns = FEATURE_COLUMNS
    if drop_duration:
        columns = tuple(c for c in columns if c.name != DURATION_COL)
    rows, target = [], []
    for adm in admissions:
        pid = adm["Patient ID"]
        start, end = adm["Admission date"], adm["Discharge date"]
        window_end = start + dt.timedelta(days=WINDOW_DAYS - 1)

        past = future = 0.0
        for date, eq in doses[pid]:
            if start <= date <= window_end:
                past += eq
            elif window_end < date <= end:
                future += eq

        in_window = [0] * len(DIAGNOSIS_GROUPS)
        demand, multiple, personality = [], False, False
        for date, tag, rec in diagnoses[pid]:
            # admission-level attributes come from trajectories overlapping the stay
            traj_start = rec["Start date"] or date
            traj_end = rec["End date"]
            if traj_start <= end and (traj_end is None or traj_end >= start):
                if rec["Level of care demand"] is not None:
                    demand.append(rec["Level of care demand"])
                multiple = multiple or bool(rec["Multiple problem"])
                personality = personality or bool(rec["Personality disorder"])
            if primary_dates_only and tag != "primary":
                continue
            if start <= date <= window_end:
                in_window[DIAGNOSIS_GROUPS.index(rec["Main diagnosis group"])] = 1

        before = sum(d < start for d in incidents[pid])
        during = sum(start <= d <= window_end for d in incidents[pid])
        ward = WARDS.get(adm["Nursing ward ID"])

        values = {
            "Patient ID": pid,
            "Emergency": bool(adm["Emergency"]),
            "First admission": bool(adm["First admission"]),
            "Gender": adm["Gender"],
            "Age at admission": adm["Age at admission"],
            "Duration in days": adm["Duration in days"],
            "Age at start of dossier": dossier_age.get(pid),
            "Incidents during admission": during,
            "Incidents before admission": before,
            "Multiple problem": multiple,
            "Personality disorder": personality,
            "Minimum level of care demand": float(min(demand)) if demand else 0.0,
            "Maximum level of care demand": float(max(demand)) if demand else 0.0,
            "Past diazepam-equivalent dose": past,
            "Future diazepam-equivalent dose": future,
        }
        for ward_name in WARDS.values():
            values[f"Nursing ward: {ward_name}"] = ward == ward_name
        for group, flag in zip(DIAGNOSIS_GROUPS, in_window):
            values[f"Diagnosis: {group}"] = bool(flag)
        rows.append(tuple(values[c.name] for c in columns))
        target.append(1 if future > 0 else 0)

    return Table("features", columns, rows), np.array(target, dtype=np.int8), prov


def load_features(path) -> Table:
    """Read a features.csv written by :func:`assemble` (with or without duration)."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    schema = [c for c in FEATURE_COLUMNS if c.name in header]
    return load_csv(path, schema, "features")


def to_dataset(features: Table) -> LabeledDataset:
    """Labeled view of a feature table: man is privileged, any future dose is favourable."""
    return to_labeled(features, TARGET_DOSE_COL, GENDER_COL, PATIENT_COL, "man", lambda dose: dose > 0)
