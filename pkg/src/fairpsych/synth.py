"""Synthetic five-table EHR bundles with a controllable gender bias.

The generator stands in for a private clinical extract. Distributions are
simple and arbitrary; what matters is that the pipeline is exercised end to
end and that the amount of label bias is a knob.

Bias enters through benzodiazepine administration. After the first 14 days
(the prediction target) the privileged group's administration probability
is scaled by ``1 + bias_strength / 2`` and the unprivileged group's by
``1 - bias_strength / 2``, after normalizing each group's mean risk to
``base_benzo_rate``; the expected rate gap is therefore
``bias_strength * base_benzo_rate`` up to clipping at 1. The same prescribers
also treat the first fortnight, so the log-odds of early use shift by
``PAST_BIAS * bias_strength`` (up for men, down for women). Gender itself is
not a model feature; the early doses and the gender-skewed ward and
diagnosis mixes carry it.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import DataError, Table
from .ehr import DIAGNOSIS_GROUPS, GENDERS, SCHEMAS, WARDS, RawEhrBundle
from .featurize import DEFAULT_MULTIPLIERS, WINDOW_DAYS, filter_admissions

# Relative prescription frequency and typical unit doses (mg) per drug.
DRUG_PROFILES = {
    "Oxazepam": (10.0, (10.0, 15.0, 30.0, 50.0)),
    "Lorazepam": (9.0, (0.5, 1.0, 2.0, 2.5)),
    "Diazepam": (6.0, (2.0, 5.0, 10.0)),
    "Temazepam": (5.0, (10.0, 20.0)),
    "Zolpidem": (3.0, (5.0, 10.0)),
    "Zopiclone": (3.0, (3.75, 7.5)),
    "Midazolam": (1.5, (2.5, 5.0, 7.5)),
    "Clorazepate potassium": (1.0, (5.0, 10.0, 15.0)),
    "Alprazolam": (1.0, (0.25, 0.5, 1.0)),
    "Bromazepam": (0.8, (3.0, 6.0)),
    "Brotizolam": (0.8, (0.125, 0.25)),
    "Chlordiazepoxide": (0.8, (10.0, 25.0)),
    "Clobazam": (0.6, (10.0, 20.0)),
    "Flunitrazepam": (0.4, (0.5, 1.0)),
    "Flurazepam": (0.4, (15.0, 30.0)),
    "Lormetazepam": (0.8, (0.5, 1.0, 2.0)),
    "Nitrazepam": (0.8, (5.0, 10.0)),
}
assert set(DRUG_PROFILES) == set(DEFAULT_MULTIPLIERS)

ATC_CODES = {
    "Oxazepam": "N05BA04", "Lorazepam": "N05BA06", "Diazepam": "N05BA01",
    "Temazepam": "N05CD07", "Zolpidem": "N05CF02", "Zopiclone": "N05CF01",
    "Midazolam": "N05CD08", "Clorazepate potassium": "N05BA05", "Alprazolam": "N05BA12",
    "Bromazepam": "N05BA08", "Brotizolam": "N05CD09", "Chlordiazepoxide": "N05BA02",
    "Clobazam": "N05BA09", "Flunitrazepam": "N05CD03", "Flurazepam": "N05CD01",
    "Lormetazepam": "N05CD06", "Nitrazepam": "N05CD02",
}

# Baseline diagnosis-group frequencies, then per-gender multipliers.
_DIAG_BASE = np.array([4, 2, 6, 3, 7, 2, 12, 1, 2, 7, 2, 2, 1, 6, 1, 14, 2, 5, 2], dtype=float)
_DIAG_MAN = dict.fromkeys(DIAGNOSIS_GROUPS, 1.0) | {
    "Substance-Related and Addiction Disorders": 3.0,
    "Attention Deficit Disorder": 2.5,
    "Autism spectrum disorder": 2.5,
    "Schizophrenia and other psychotic disorders": 1.6,
    "Behavioral disorders": 2.0,
}
_DIAG_WOMAN = dict.fromkeys(DIAGNOSIS_GROUPS, 1.0) | {
    "Nutrition and Eating Disorders": 5.0,
    "Personality Disorders": 3.0,
    "Depressive Disorders": 1.6,
    "Anxiety disorders": 1.6,
    "Trauma- and stressor-related disorders": 2.5,
}


def _normalised(p):
    p = np.asarray(p, dtype=float)
    return p / p.sum()


DIAGNOSIS_P = {
    "man": _normalised(_DIAG_BASE * np.array([_DIAG_MAN[g] for g in DIAGNOSIS_GROUPS])),
    "woman": _normalised(_DIAG_BASE * np.array([_DIAG_WOMAN[g] for g in DIAGNOSIS_GROUPS])),
}
WARD_IDS = tuple(WARDS)
WARD_P = {
    "man": _normalised([0.15, 0.60, 0.05, 0.20]),
    "woman": _normalised([0.50, 0.10, 0.20, 0.20]),
}
# Shift in the log-odds of first-fortnight use per unit of bias_strength.
PAST_BIAS = 1.0
OUTSIDE_WARD = "SOM"  # transferred in from a somatic department


def _date(value) -> dt.date:
    return value if isinstance(value, dt.date) else dt.date.fromisoformat(str(value))


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_patients: int = 1000
    mean_admissions_per_patient: float = 1.5
    p_emergency: float = 0.3
    base_benzo_rate: float = 0.45
    bias_strength: float = 0.0
    date_range: tuple[dt.date, dt.date] = (dt.date(2011, 6, 1), dt.date(2021, 5, 31))
    p_long_stay: float = 0.8
    p_ongoing: float = 0.04
    p_outside_ward: float = 0.08
    p_missing_diagnosis_date: float = 0.15
    p_missing_end_date: float = 0.3
    p_not_administered: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "date_range", tuple(_date(d) for d in self.date_range))
        if int(self.seed) < 0 or int(self.seed) != self.seed:
            raise DataError("seed must be an unsigned integer")
        if int(self.n_patients) != self.n_patients or self.n_patients < 0:
            raise DataError("n_patients must be a non-negative integer")
        if not self.mean_admissions_per_patient >= 1:
            raise DataError("mean_admissions_per_patient must be at least 1")
        for name in ("p_emergency", "base_benzo_rate", "bias_strength", "p_long_stay", "p_ongoing",
                     "p_outside_ward", "p_missing_diagnosis_date", "p_missing_end_date",
                     "p_not_administered"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DataError(f"{name} must lie in [0, 1], got {v}")
        start, end = self.date_range
        if not start < end:
            raise DataError("date_range start must precede its end")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise DataError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["date_range"] = [x.isoformat() for x in self.date_range]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass
class _Stay:
    patient: int
    admission_id: str
    ward: str
    start: dt.date
    duration: int
    discharged: bool
    emergency: bool
    first: bool
    severity: float
    past_use: bool = False
    risk: float = 0.0
    meds: list = field(default_factory=list)


def generate(config: SynthConfig) -> RawEhrBundle:
    """Draw a bundle; identical configs give identical bundles."""
    rng = np.random.default_rng(config.seed)
    start, end = config.date_range
    span = (end - start).days
    drugs = list(DRUG_PROFILES)
    drug_p = _normalised([DRUG_PROFILES[d][0] for d in drugs])

    patients, admissions, diagnoses, aggression, stays = [], [], [], [], []
    genders, ages, dossier_years = [], [], []
    diag_no = 0
    for i in range(config.n_patients):
        pid = f"P{i + 1:06d}"
        gender = "man" if rng.random() < 0.5 else "woman"
        age = int(rng.integers(14, 80))
        dossier_year = start.year - int(rng.integers(0, 11))
        genders.append(gender)
        ages.append(age)
        dossier_years.append(dossier_year)
        patients.append((pid, age))

        n_adm = 1 + int(rng.poisson(config.mean_admissions_per_patient - 1.0))
        day = int(rng.integers(0, max(span - 30, 1)))
        frailty = rng.normal(0.0, 0.6)
        for k in range(n_adm):
            adm_date = start + dt.timedelta(days=day)
            if adm_date > end:
                break
            if rng.random() < config.p_long_stay:
                duration = WINDOW_DAYS + int(rng.poisson(24))
            else:
                duration = int(rng.integers(1, WINDOW_DAYS))
            discharged = rng.random() >= config.p_ongoing
            if rng.random() < config.p_outside_ward:
                ward = OUTSIDE_WARD
            else:
                ward = WARD_IDS[rng.choice(len(WARD_IDS), p=WARD_P[gender])]
            stay = _Stay(
                patient=i,
                admission_id=f"A{len(stays) + 1:07d}",
                ward=ward,
                start=adm_date,
                duration=duration,
                discharged=discharged,
                emergency=bool(rng.random() < config.p_emergency),
                first=k == 0,
                severity=float(frailty + rng.normal(0.0, 0.8)),
            )
            stays.append(stay)

            # diagnoses are dated mostly inside the first two weeks
            for _ in range(1 + int(rng.poisson(0.9))):
                diag_no += 1
                group = DIAGNOSIS_GROUPS[rng.choice(len(DIAGNOSIS_GROUPS), p=DIAGNOSIS_P[gender])]
                traj_start = adm_date - dt.timedelta(days=int(rng.integers(0, 365)))
                traj_end = adm_date + dt.timedelta(days=duration + int(rng.integers(0, 180)))
                if rng.random() < 0.85:
                    diag_date = adm_date + dt.timedelta(days=int(rng.integers(0, WINDOW_DAYS)))
                else:
                    diag_date = adm_date + dt.timedelta(days=int(rng.integers(0, duration + 1)))
                if rng.random() < config.p_missing_diagnosis_date:
                    diag_date = None
                    if rng.random() < config.p_missing_end_date:
                        traj_end = None
                demand = float(np.clip(np.round(4.0 + 1.5 * stay.severity + rng.normal(0, 1.0)), 1, 9))
                personality = group == "Personality Disorders" or bool(rng.random() < 0.08)
                diagnoses.append((
                    pid, f"D{diag_no:07d}", traj_start, traj_end, group, demand,
                    bool(rng.random() < 0.15 + 0.1 * (stay.severity > 1)), personality, True, diag_date,
                ))

            n_before = int(rng.poisson(0.3 * np.exp(0.4 * stay.severity)))
            for _ in range(n_before):
                when = adm_date - dt.timedelta(days=int(rng.integers(1, 720)))
                aggression.append((pid, when, _time(rng)))
            n_during = int(rng.poisson(0.35 * np.exp(0.6 * stay.severity)))
            for _ in range(n_during):
                when = adm_date + dt.timedelta(days=int(rng.integers(0, min(duration, WINDOW_DAYS) + 1)))
                aggression.append((pid, when, _time(rng)))

            day += duration + 14 + int(rng.poisson(150))

    # first-fortnight use, driven by severity and emergency status
    for s in stays:
        sign = 1.0 if genders[s.patient] == "man" else -1.0
        p_past = _sigmoid(0.3 + 1.1 * s.severity + 0.5 * s.emergency + sign * PAST_BIAS * config.bias_strength)
        s.past_use = bool(rng.random() < p_past)
        if s.past_use:
            for _ in range(1 + int(rng.poisson(2.0 + 1.5 * max(s.severity, 0.0)))):
                offset = int(rng.integers(0, min(s.duration, WINDOW_DAYS - 1) + 1))
                s.meds.append((offset, *_draw_drug(rng, drugs, drug_p)))
        s.risk = float(_sigmoid(-1.6 + 2.8 * s.past_use + 0.7 * s.severity))

    # later use: the target. Each gender's risks are rescaled to mean base_benzo_rate.
    scale = {}
    for g in GENDERS:
        risks = [s.risk for s in stays if genders[s.patient] == g]
        scale[g] = config.base_benzo_rate / np.mean(risks) if risks else 1.0
    for s in stays:
        g = genders[s.patient]
        factor = 1.0 + config.bias_strength / 2.0 if g == "man" else 1.0 - config.bias_strength / 2.0
        p_future = min(1.0, s.risk * scale[g] * factor)
        if rng.random() < p_future and s.duration > WINDOW_DAYS:
            for _ in range(1 + int(rng.poisson(3.0))):
                offset = int(rng.integers(WINDOW_DAYS, s.duration + 1))
                s.meds.append((offset, *_draw_drug(rng, drugs, drug_p)))

    medication = []
    presc_no = 0
    for s in stays:
        pid = patients[s.patient][0]
        for offset, drug, dose in sorted(s.meds):
            presc_no += 1
            given = rng.random() >= config.p_not_administered
            administered, not_administered = given, not given
            r = rng.random()
            if r < 0.05:
                not_administered = None
            elif r < 0.08 and not given:
                administered = None
            medication.append((
                pid, f"R{presc_no:08d}", ATC_CODES[drug], drug, dose, "mg",
                s.start + dt.timedelta(days=offset), _time(rng), administered,
                dose if given else 0.0, dose, bool(rng.random() < 0.02), not_administered,
            ))
    if patients:
        # one administration without a date, as in the source extract
        presc_no += 1
        medication.append((
            patients[0][0], f"R{presc_no:08d}", ATC_CODES["Oxazepam"], "Oxazepam", 10.0, "mg",
            None, None, True, 10.0, 10.0, False, False,
        ))

    admission_rows = []
    for s in stays:
        pid = patients[s.patient][0]
        discharge = s.start + dt.timedelta(days=s.duration) if s.discharged else None
        admission_rows.append((
            s.admission_id, pid, s.ward, s.start, discharge, _time(rng),
            _time(rng) if s.discharged else None, s.emergency, s.first, genders[s.patient],
            ages[s.patient] + s.start.year - dossier_years[s.patient],
            "Discharged" if s.discharged else "Ongoing", s.duration,
        ))

    return RawEhrBundle(
        admissions=Table("admissions", SCHEMAS["admissions"], admission_rows),
        medication=Table("medication", SCHEMAS["medication"], medication),
        diagnoses=Table("diagnoses", SCHEMAS["diagnoses"], diagnoses),
        aggression=Table("aggression", SCHEMAS["aggression"], aggression),
        patient=Table("patient", SCHEMAS["patient"], patients),
    )


def _time(rng) -> dt.time:
    return dt.time(int(rng.integers(0, 24)), int(rng.integers(0, 60)), int(rng.integers(0, 60)))


def _draw_drug(rng, drugs, drug_p):
    drug = drugs[rng.choice(len(drugs), p=drug_p)]
    doses = DRUG_PROFILES[drug][1]
    return drug, float(doses[rng.integers(0, len(doses))])


def summarize(bundle: RawEhrBundle) -> dict:
    """Headline counts over completed admissions of at least 14 days.

    Counts admissions, admissions per gender, and admissions with any
    administered benzodiazepine in the first 14 days and afterwards.
    """
    kept = filter_admissions(bundle.admissions).records()
    given = {}
    for rec in bundle.medication.records():
        if rec["Administered"] is True and rec["Administration date"] is not None:
            given.setdefault(rec["Patient ID"], []).append(rec["Administration date"])
    counts = {"admissions": 0, "man": 0, "woman": 0, "benzo_first_14_days": 0, "benzo_after_14_days": 0}
    for adm in kept:
        counts["admissions"] += 1
        counts[adm["Gender"]] += 1
        first_end = adm["Admission date"] + dt.timedelta(days=WINDOW_DAYS - 1)
        dates = given.get(adm["Patient ID"], [])
        if any(adm["Admission date"] <= d <= first_end for d in dates):
            counts["benzo_first_14_days"] += 1
        if any(first_end < d <= adm["Discharge date"] for d in dates):
            counts["benzo_after_14_days"] += 1
    return counts
