"""Schemas of the five raw EHR tables and the bundle that groups them."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .dataset import Column, DataError, Table, load_csv, write_csv

GENDERS = ("man", "woman")
ADMISSION_STATUSES = ("Discharged", "Ongoing")

# Nursing ward IDs and the ward each one names.
WARDS = {
    "CAPD": "Clinical Affective & Psychotic Disorders",
    "CAIC": "Clinical Acute & Intensive Care",
    "CAICY": "Clinical Acute & Intensive Care Youth",
    "CDEP": "Clinical Diagnosis & Early Psychosis",
}

DIAGNOSIS_GROUPS = (
    "Attention Deficit Disorder",
    "Other issues that may be a cause for concern",
    "Anxiety disorders",
    "Autism spectrum disorder",
    "Bipolar Disorders",
    "Cognitive disorders",
    "Depressive Disorders",
    "Dissociative Disorders",
    "Behavioral disorders",
    "Substance-Related and Addiction Disorders",
    "Obsessive Compulsive and Related Disorders",
    "Other mental disorders",
    "Overige stoornissen op zuigelingen of kinderleeftijd",
    "Personality Disorders",
    "Psychiatric disorders due to a general medical condition",
    "Schizophrenia and other psychotic disorders",
    "Somatic Symptom Disorder and Related Disorders",
    "Trauma- and stressor-related disorders",
    "Nutrition and Eating Disorders",
)

ADMISSIONS = (
    Column("Admission ID", "identifier"),
    Column("Patient ID", "identifier"),
    Column("Nursing ward ID", "identifier"),
    Column("Admission date", "date"),
    Column("Discharge date", "date"),
    Column("Admission time", "time"),
    Column("Discharge time", "time"),
    Column("Emergency", "boolean"),
    Column("First admission", "boolean"),
    Column("Gender", "categorical", GENDERS),
    Column("Age at admission", "integer"),
    Column("Admission status", "categorical", ADMISSION_STATUSES),
    Column("Duration in days", "integer"),
)

MEDICATION = (
    Column("Patient ID", "identifier"),
    Column("Prescription ID", "identifier"),
    Column("ATC code (medication ID)", "identifier"),
    Column("Medication name", "categorical"),
    Column("Dose", "float"),
    Column("Unit (for dose)", "categorical"),
    Column("Administration date", "date"),
    Column("Administration time", "time"),
    Column("Administered", "boolean"),
    Column("Dose used", "float"),
    Column("Original dose", "float"),
    Column("IsContinuationAfterSuspension", "boolean"),
    Column("Not administered", "boolean"),
)

DIAGNOSES = (
    Column("Patient ID", "identifier"),
    Column("Diagnosis number", "identifier"),
    Column("Start date", "date"),
    Column("End date", "date"),
    Column("Main diagnosis group", "categorical", DIAGNOSIS_GROUPS),
    Column("Level of care demand", "float"),
    Column("Multiple problem", "boolean"),
    Column("Personality disorder", "boolean"),
    Column("Admission", "boolean"),
    Column("Diagnosis date", "date"),
)

AGGRESSION = (
    Column("Patient ID", "identifier"),
    Column("Date of incident", "date"),
    Column("Start time", "time"),
)

PATIENT = (
    Column("Patient ID", "identifier"),
    Column("Age at start of dossier", "integer"),
)

SCHEMAS = {
    "admissions": ADMISSIONS,
    "medication": MEDICATION,
    "diagnoses": DIAGNOSES,
    "aggression": AGGRESSION,
    "patient": PATIENT,
}


@dataclass(frozen=True)
class RawEhrBundle:
    admissions: Table
    medication: Table
    diagnoses: Table
    aggression: Table
    patient: Table

    def __post_init__(self):
        for name, schema in SCHEMAS.items():
            table = getattr(self, name)
            if table.columns != schema:
                raise DataError(f"{name} table does not follow the {name} schema")

    @classmethod
    def empty(cls) -> "RawEhrBundle":
        return cls(**{name: Table(name, schema) for name, schema in SCHEMAS.items()})

    def tables(self) -> dict[str, Table]:
        return {name: getattr(self, name) for name in SCHEMAS}

    def check_integrity(self) -> None:
        """Raise :class:`DataError` on the first violated bundle invariant."""
        patients = set(self.patient.column("Patient ID"))
        for name in ("admissions", "medication", "diagnoses", "aggression"):
            for pid in getattr(self, name).column("Patient ID"):
                if pid not in patients:
                    raise DataError(f"{name} references unknown patient {pid!r}")
        for rec in self.admissions.records():
            end = rec["Discharge date"]
            if rec["Admission status"] == "Discharged":
                if end is None:
                    raise DataError(f"admission {rec['Admission ID']} is discharged without a date")
                if end < rec["Admission date"]:
                    raise DataError(f"admission {rec['Admission ID']} ends before it starts")
        for a, na in zip(self.medication.column("Administered"), self.medication.column("Not administered")):
            if a is True and na is True:
                raise DataError("medication row both administered and not administered")


def write_bundle(bundle: RawEhrBundle, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, table in bundle.tables().items():
        path = out_dir / f"{name}.csv"
        write_csv(table, path)
        paths.append(path)
    return paths


def read_bundle(in_dir: str | Path) -> RawEhrBundle:
    in_dir = Path(in_dir)
    return RawEhrBundle(
        **{name: load_csv(in_dir / f"{name}.csv", schema, name) for name, schema in SCHEMAS.items()}
    )
