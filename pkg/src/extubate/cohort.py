"""Cohort records, outcome annotation, exclusion filters and a synthetic generator."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .catalog import CATEGORICAL_KINDS, DEFAULT_CATALOG, FeatureSpec
from .exceptions import ConfigError, DataError

WINDOW = 360
FAILURE_HORIZON = 48 * 60
SUPPORT_HORIZON = 6 * 60
MIN_VENT_MINUTES = 24 * 60
MAX_VENT_MINUTES = 30 * 24 * 60

SUPPORT_KINDS = ("NIV", "O2-flow", "CPAP", "BiPAP")
ETHNICITIES = ("ASIAN", "BLACK", "HISPANIC", "WHITE", "OTHER")
GENDERS = ("male", "female")

CHARLSON_WEIGHTS: dict[str, int] = {
    "Prior myocardial infarction": 1,
    "Congestive heart failure": 1,
    "Peripheral vascular disease": 1,
    "Cerebrovascular disease": 1,
    "Dementia": 1,
    "Chronic pulmonary disease": 1,
    "Rheumatologic disease": 1,
    "Peptic ulcer disease": 1,
    "Mild liver disease": 1,
    "Diabetes": 1,
    "Cerebrovascular event": 2,
    "Moderate-to-severe renal disease": 2,
    "Diabetes with chronic complications": 2,
    "Cancer without metastases": 2,
    "Leukemia": 2,
    "Lymphoma": 2,
    "Moderate or severe liver disease": 3,
    "Metastatic solid tumour": 6,
    "Acquired immunodeficiency syndrome (AIDS)": 6,
}
CHARLSON_ALIASES = {"AIDS": "Acquired immunodeficiency syndrome (AIDS)"}
# (lower age bound, points), checked from the top
AGE_POINTS = ((80, 4), (70, 3), (60, 2), (50, 1))


@dataclass
class EventRecord:
    patient_id: str
    feature: str
    time: int
    value: float


@dataclass
class StaticProfile:
    patient_id: str
    age: float
    gender: str
    ethnicity: str
    weight: float | None = None
    height: float | None = None
    comorbidities: list[str] = field(default_factory=list)
    palliative: bool = False
    head_neck_surgery: bool = False

    def __post_init__(self):
        if self.age < 0:
            raise DataError(f"{self.patient_id}: age must be >= 0")
        for name in ("weight", "height"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise DataError(f"{self.patient_id}: {name} must be positive when present")
        self.comorbidities = sorted(self.comorbidities)


@dataclass
class VentilationTimeline:
    patient_id: str
    ventilation_start: int
    extubation_end: int
    reintubation_starts: list[int] = field(default_factory=list)
    death_time: int | None = None
    support_events: list[tuple[int, str]] = field(default_factory=list)
    admission_index: int = 1

    def __post_init__(self):
        self.reintubation_starts = sorted(int(t) for t in self.reintubation_starts)
        self.support_events = [(int(t), str(k)) for t, k in self.support_events]
        if self.extubation_end < self.ventilation_start:
            raise DataError(f"{self.patient_id}: extubation ends before ventilation starts")
        times = [self.ventilation_start, self.extubation_end, *self.reintubation_starts,
                 *(t for t, _ in self.support_events)]
        if self.death_time is not None:
            times.append(self.death_time)
        if min(times) < 0:
            raise DataError(f"{self.patient_id}: event times must be non-negative")


# ----------------------------------------------------------------- charlson

def charlson_score(comorbidities, age: float) -> int:
    """Charlson comorbidity index: condition weights plus age-bracket points."""
    total = 0
    for cond in comorbidities:
        key = CHARLSON_ALIASES.get(cond, cond)
        if key not in CHARLSON_WEIGHTS:
            raise DataError(f"unknown Charlson condition {cond!r}")
        total += CHARLSON_WEIGHTS[key]
    for lower, points in AGE_POINTS:
        if age >= lower:
            total += points
            break
    return total


# --------------------------------------------------------------- annotation

def annotate_outcome(tl: VentilationTimeline) -> int:
    """1 if extubation failed, else 0.

    Failure is any of: reintubation within 48 h, death within 48 h, or a
    ventilatory-support event within 6 h, all measured from the end of
    extubation. Events before the end of extubation do not count.
    """
    end = tl.extubation_end
    if any(end <= t <= end + FAILURE_HORIZON for t in tl.reintubation_starts):
        return 1
    if tl.death_time is not None and end <= tl.death_time <= end + FAILURE_HORIZON:
        return 1
    if any(end <= t <= end + SUPPORT_HORIZON for t, _ in tl.support_events):
        return 1
    return 0


def apply_inclusion_exclusion(timelines, profiles):
    """Keep first-admission adults (18-89) ventilated 24 h to 30 days who survived ventilation.

    Returns the filtered ``(timelines, profiles)`` in input order.
    """
    by_id = {p.patient_id: p for p in profiles}
    kept_t, kept_p = [], []
    for tl in timelines:
        prof = by_id.get(tl.patient_id)
        if prof is None:
            raise DataError(f"timeline {tl.patient_id!r} has no matching profile")
        duration = tl.extubation_end - tl.ventilation_start
        if not 18 <= prof.age <= 89:
            continue
        if not MIN_VENT_MINUTES <= duration <= MAX_VENT_MINUTES:
            continue
        if tl.admission_index != 1:
            continue
        if tl.death_time is not None and tl.death_time <= tl.extubation_end:
            continue
        if prof.palliative or prof.head_neck_surgery:
            continue
        kept_t.append(tl)
        kept_p.append(prof)
    return kept_t, kept_p


# ---------------------------------------------------------------- generator

@dataclass
class GeneratorConfig:
    n_patients: int = 500
    failure_rate: float = 0.33
    feature_catalog: list[FeatureSpec] = field(default_factory=lambda: list(DEFAULT_CATALOG))
    noise_scale: float = 0.15
    seed: int = 0
    # fraction of patients built to violate one exclusion rule
    exclusion_rate: float = 0.0
    # years added to the age of failure-class patients
    static_signal: float = 0.0

    def __post_init__(self):
        self.feature_catalog = [f if isinstance(f, FeatureSpec) else FeatureSpec(**f)
                                for f in self.feature_catalog]
        if self.n_patients <= 0:
            raise ConfigError("n_patients must be positive")
        if not 0.0 < self.failure_rate < 1.0:
            raise ConfigError("failure_rate must lie strictly between 0 and 1")
        if not 0.0 <= self.exclusion_rate < 1.0:
            raise ConfigError("exclusion_rate must lie in [0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["feature_catalog"] = [f.to_dict() for f in self.feature_catalog]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown generator config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "GeneratorConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (TypeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"bad generator config {path}: {exc}") from exc


def _make_timeline(pid, label, rng, violate):
    duration = int(rng.integers(MIN_VENT_MINUTES, 14 * 24 * 60))
    start = int(rng.integers(0, 500_000))
    if violate == "duration":
        duration = int(rng.integers(60, MIN_VENT_MINUTES))
    end = start + duration
    reint, death, support = [], None, []
    if label:
        which = rng.choice(3, p=[0.35, 0.25, 0.40])
        if which == 0:
            reint.append(end + int(rng.integers(0, FAILURE_HORIZON + 1)))
        elif which == 1:
            death = end + int(rng.integers(1, FAILURE_HORIZON + 1))
        else:
            support.append((end + int(rng.integers(0, SUPPORT_HORIZON + 1)),
                            SUPPORT_KINDS[rng.integers(len(SUPPORT_KINDS))]))
    else:
        # decoys just outside each window
        if rng.random() < 0.15:
            reint.append(end + int(rng.integers(FAILURE_HORIZON + 1, 4 * FAILURE_HORIZON)))
        if rng.random() < 0.25:
            support.append((end + int(rng.integers(SUPPORT_HORIZON + 1, 3 * SUPPORT_HORIZON)),
                            SUPPORT_KINDS[rng.integers(len(SUPPORT_KINDS))]))
        if rng.random() < 0.05:
            death = end + int(rng.integers(FAILURE_HORIZON + 1, 10 * FAILURE_HORIZON))
    if violate == "died":
        death = end - int(rng.integers(1, 600))
    return VentilationTimeline(pid, start, end, reint, death, support,
                               admission_index=2 if violate == "readmission" else 1)


def _make_profile(pid, label, rng, cfg, violate):
    age = float(np.clip(np.round(rng.normal(63, 15)), 18, 89))
    if cfg.static_signal and label:
        age = float(np.clip(age + cfg.static_signal, 18, 89))
    if violate == "age":
        age = float(rng.choice([int(rng.integers(0, 18)), int(rng.integers(90, 100))]))
    gender = GENDERS[int(rng.random() < 0.42)]
    ethnicity = ETHNICITIES[rng.choice(5, p=[0.03, 0.10, 0.04, 0.65, 0.18])]
    weight = float(np.round(np.clip(rng.normal(82, 20), 35, 200), 1))
    height = float(np.round(np.clip(rng.normal(170, 10), 140, 205), 1))
    if rng.random() < 0.05:
        weight = None
    if rng.random() < 0.10:
        height = None
    conds = [c for c in CHARLSON_WEIGHTS if rng.random() < 0.06]
    return StaticProfile(pid, age, gender, ethnicity, weight, height, conds,
                         palliative=violate == "palliative",
                         head_neck_surgery=violate == "surgery")


def _feature_values(spec: FeatureSpec, label, n, rng, noise):
    centre = 0.5 * (spec.low + spec.high)
    width = spec.high - spec.low
    vals = centre + width * (spec.signal * label + rng.normal(0.0, noise, size=n))
    if spec.kind in CATEGORICAL_KINDS:
        lo, hi = CATEGORICAL_KINDS[spec.kind]
        vals = np.clip(np.round(vals), lo, hi)
    return vals


def generate_cohort(config: GeneratorConfig):
    """Synthetic events, profiles and timelines with a planted class signal.

    Per patient, feature ``f`` gets Poisson(frequency) observations at uniform
    integer minutes in [0, 360]; each value is ``centre + width * (signal * y
    + N(0, noise_scale))`` where centre/width come from the catalog range.
    """
    rng = np.random.default_rng(config.seed)
    violations = ("age", "duration", "readmission", "died", "palliative", "surgery")
    events, profiles, timelines = [], [], []
    width = len(str(config.n_patients))
    for i in range(config.n_patients):
        pid = f"P{i:0{max(width, 5)}d}"
        label = int(rng.random() < config.failure_rate)
        violate = None
        if config.exclusion_rate and rng.random() < config.exclusion_rate:
            violate = violations[rng.integers(len(violations))]
        timelines.append(_make_timeline(pid, label, rng, violate))
        profiles.append(_make_profile(pid, label, rng, config, violate))
        for spec in config.feature_catalog:
            n = int(rng.poisson(spec.frequency))
            if n == 0:
                continue
            times = np.sort(rng.integers(0, WINDOW + 1, size=n))
            vals = _feature_values(spec, label, n, rng, config.noise_scale)
            events.extend(EventRecord(pid, spec.id, int(t), float(v)) for t, v in zip(times, vals))
    return events, profiles, timelines


# -------------------------------------------------------------- ndjson i/o

def _timeline_record(tl: VentilationTimeline) -> dict:
    d = asdict(tl)
    d["support_events"] = [[t, k] for t, k in tl.support_events]
    return d


def write_ndjson(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            d = _timeline_record(r) if isinstance(r, VentilationTimeline) else asdict(r)
            fh.write(json.dumps(d, sort_keys=True) + "\n")


def read_ndjson(path, kind):
    cls = {"events": EventRecord, "profiles": StaticProfile, "timelines": VentilationTimeline}[kind]
    path = Path(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                if cls is VentilationTimeline:
                    d["support_events"] = [tuple(e) for e in d.get("support_events", [])]
                out.append(cls(**d))
            except (TypeError, json.JSONDecodeError) as exc:
                raise DataError(f"{path}:{lineno}: bad {kind} record: {exc}") from exc
    return out


def labels_for(timelines) -> dict[str, int]:
    return {tl.patient_id: annotate_outcome(tl) for tl in timelines}
