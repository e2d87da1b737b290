"""Default dynamic-feature catalog for the synthetic cohort generator.

Frequencies are mean observations per patient in the 360-minute pre-extubation
window. Value ranges follow typical charted bounds; ``set`` is the smallest
incremental feature set (1, 2 or 3) that contains the feature.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

CATEGORICAL_KINDS = {"RAS": (-5, 4), "GCS-eye": (1, 4), "GCS-motor": (1, 6)}


@dataclass(frozen=True)
class FeatureSpec:
    id: str
    frequency: float
    low: float
    high: float
    signal: float = 0.0
    kind: str = "numeric"
    feature_set: int = 1
    nonnegative: bool = True

    def __post_init__(self):
        if self.frequency < 0:
            raise ValueError(f"{self.id}: sampling frequency must be >= 0")
        if self.kind != "numeric" and self.kind not in CATEGORICAL_KINDS:
            raise ValueError(f"{self.id}: unknown feature kind {self.kind!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def _f(id, freq, low, high, signal=0.0, kind="numeric", fs=1, nonneg=True):
    return FeatureSpec(id, freq, low, high, signal, kind, fs, nonneg)


DEFAULT_CATALOG: tuple[FeatureSpec, ...] = (
    # feature set 1
    _f("Respiratory Rate", 6.615, 0.0, 40.0, 0.10),
    _f("O2 saturation pulseoxymetry", 6.611, 88.535, 100.0, -0.05),
    _f("Inspired O2 Fraction", 2.104, 21.0, 79.189, 0.05),
    _f("Tidal Volume (observed)", 1.600, 299.0, 750.0, -0.15),
    _f("Minute Volume", 1.598, 0.0, 12.1, 0.10),
    _f("Peak Insp. Pressure", 1.524, 0.0, 40.0),
    _f("Tidal Volume (spontaneous)", 1.368, 299.0, 750.0, -0.05),
    _f("PH (Arterial)", 0.535, 7.19, 7.58),
    _f("Arterial CO2 Pressure", 0.525, 16.0, 66.916, 0.05),
    _f("Arterial O2 pressure", 0.525, 16.0, 227.632),
    _f("Hemoglobin", 0.247, 5.1, 14.485),
    _f("EtCO2", 0.189, 17.0, 59.109),
    _f("Plateau Pressure", 0.160, 2.943, 31.0),
    _f("Negative Insp. Force", 0.008, -60.0, 0.0, nonneg=False),
    # feature set 2
    _f("Heart Rate", 6.648, 30.659, 139.152, 0.05, fs=2),
    _f("Arterial Blood Pressure mean", 3.761, 25.026, 137.893, fs=2),
    _f("Arterial Blood Pressure diastolic", 3.754, 60.0, 90.0, fs=2),
    _f("Arterial Blood Pressure systolic", 3.754, 90.0, 140.0, fs=2),
    _f("GCS - Eye Opening", 1.633, 1.0, 4.0, -0.05, kind="GCS-eye", fs=2),
    _f("GCS - Motor Response", 1.628, 1.0, 6.0, kind="GCS-motor", fs=2),
    _f("Mean Airway Pressure", 1.568, 0.0, 17.102, fs=2),
    _f("Temperature Fahrenheit", 1.446, 92.586, 105.19, fs=2),
    _f("Richmond-RAS Scale", 1.279, -5.0, 4.0, kind="RAS", fs=2, nonneg=False),
    _f("Sodium (serum)", 0.307, 123.147, 157.08, fs=2),
    _f("Potassium (serum)", 0.306, 2.7, 5.797, fs=2),
    _f("Glucose (serum)", 0.271, 23.0, 282.72, fs=2),
    _f("Creatinine (serum)", 0.269, 0.2, 5.413, fs=2),
    _f("Hematocrit (serum)", 0.265, 15.2, 42.701, fs=2),
    _f("Ionized Calcium", 0.251, 0.884, 1.354, fs=2),
    _f("Platelet Count", 0.231, 6.0, 539.929, fs=2),
    _f("WBC", 0.221, 0.1, 33.118, fs=2),
    _f("Lactic Acid", 0.193, 0.5, 8.909, fs=2),
    _f("Total Bilirubin", 0.076, 0.1, 20.0, fs=2),
    # feature set 3
    _f("Arterial Base Excess", 0.525, -10.0, 10.0, fs=3, nonneg=False),
    _f("Cardiac Output (CCO)", 0.252, 4.0, 8.0, fs=3),
    _f("Arterial O2 Saturation", 0.198, 90.388, 100.0, fs=3),
    _f("Compliance", 0.143, 10.0, 100.0, fs=3),
    _f("CO2 production", 0.106, 100.0, 300.0, fs=3),
    _f("PH (Venous)", 0.045, 7.1, 7.5, fs=3),
    _f("Venous O2 Pressure", 0.039, 20.0, 100.0, fs=3),
    _f("Mixed Venous O2 % Sat", 0.039, 40.0, 90.0, fs=3),
    _f("Venous CO2 Pressure", 0.038, 30.0, 70.0, fs=3),
)

# charted normal ranges that take precedence over fitted mean +- 3 sd bounds
PROVIDED_BOUNDS: dict[str, tuple[float, float]] = {
    "PH (Arterial)": (7.190, 7.580),
    "Arterial Blood Pressure systolic": (90.0, 140.0),
    "Arterial Blood Pressure diastolic": (60.0, 90.0),
    "Tidal Volume (observed)": (299.0, 750.0),
    "Tidal Volume (spontaneous)": (299.0, 750.0),
    "Arterial Base Excess": (-10.0, 10.0),
}

# removed from every feature set before modelling
EXCLUDED_FEATURES = frozenset({"Ventilator Mode"})

FEATURE_SET_THRESHOLDS = {1: 0.5, 2: 0.5, 3: 0.15}


def catalog_for_set(catalog, feature_set: int):
    return [f for f in catalog if f.feature_set <= feature_set]


def feature_kinds(catalog) -> dict[str, str]:
    return {f.id: f.kind for f in catalog}
