"""Credit-risk records: CSV ingest, cleaning, one-hot expansion, normalization.

Column names follow the public Kaggle "credit_risk_dataset.csv" header.  When
that file is not available, :func:`synthesize` produces records with the same
schema from a known logistic model.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

NUMERIC = (
    "person_age",
    "person_income",
    "person_emp_length",
    "loan_amnt",
    "loan_int_rate",
    "loan_percent_income",
    "cb_person_cred_hist_length",
)
CATEGORIES = {
    "person_home_ownership": ("MORTGAGE", "OTHER", "OWN", "RENT"),
    "loan_intent": ("DEBTCONSOLIDATION", "EDUCATION", "HOMEIMPROVEMENT", "MEDICAL", "PERSONAL", "VENTURE"),
    "loan_grade": ("A", "B", "C", "D", "E", "F", "G"),
    "cb_person_default_on_file": ("N", "Y"),
}
TARGET = "loan_status"
FEATURE_NAMES = NUMERIC + tuple(f"{col}_{v}" for col, vals in CATEGORIES.items() for v in vals)
N_FEATURES = len(FEATURE_NAMES)  # 26

MAX_AGE = 100
MAX_EMP_LENGTH = 60
STD_FLOOR = 1e-6


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class RawRecord:
    person_age: float | None
    person_income: float | None
    person_home_ownership: str | None
    person_emp_length: float | None
    loan_intent: str | None
    loan_grade: str | None
    loan_amnt: float | None
    loan_int_rate: float | None
    loan_percent_income: float | None
    cb_person_default_on_file: str | None
    cb_person_cred_hist_length: float | None
    loan_status: int | None

    @property
    def has_missing(self) -> bool:
        return any(getattr(self, f.name) is None for f in fields(self))


COLUMNS = tuple(f.name for f in fields(RawRecord))


def schema() -> dict:
    return {
        "features": list(FEATURE_NAMES),
        "numeric": list(NUMERIC),
        "categories": {k: list(v) for k, v in CATEGORIES.items()},
        "target": TARGET,
    }


def schema_hash() -> str:
    blob = json.dumps(schema(), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_schema(path) -> None:
    doc = schema()
    doc["hash"] = schema_hash()
    Path(path).write_text(json.dumps(doc, indent=2))


def _num(text: str):
    try:
        x = float(text)
    except (TypeError, ValueError):
        return None
    return x if math.isfinite(x) else None


def _label(text: str):
    x = _num(text)
    return int(x) if x in (0.0, 1.0) else None


def load_csv(path) -> list[RawRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in COLUMNS if c not in (reader.fieldnames or ())]
        if missing:
            raise DataError(f"missing columns: {', '.join(missing)}")
        out = []
        for row in reader:
            vals = {}
            for c in COLUMNS:
                raw = (row.get(c) or "").strip()
                if c == TARGET:
                    vals[c] = _label(raw)
                elif c in CATEGORIES:
                    vals[c] = raw or None
                else:
                    vals[c] = _num(raw)
            out.append(RawRecord(**vals))
    return out


def write_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS)
        w.writeheader()
        for r in records:
            w.writerow({k: ("" if v is None else v) for k, v in asdict(r).items()})


def clean(records) -> list[RawRecord]:
    """Drop rows with missing fields and the dataset's impossible values."""
    return [
        r for r in records
        if not r.has_missing and r.person_age <= MAX_AGE and r.person_emp_length <= MAX_EMP_LENGTH
    ]


def expand_record(r: RawRecord) -> np.ndarray:
    x = np.zeros(N_FEATURES)
    for i, name in enumerate(NUMERIC):
        x[i] = getattr(r, name)
    i = len(NUMERIC)
    for col, values in CATEGORIES.items():
        v = getattr(r, col)
        if v not in values:
            raise DataError(f"unknown {col} value {v!r}")
        x[i + values.index(v)] = 1.0
        i += len(values)
    return x


def expand_features(records) -> tuple[np.ndarray, np.ndarray]:
    """(n, 26) design matrix and label vector from cleaned records."""
    records = list(records)
    if not records:
        return np.zeros((0, N_FEATURES)), np.zeros(0, dtype=np.int64)
    X = np.stack([expand_record(r) for r in records])
    y = np.array([r.loan_status for r in records], dtype=np.int64)
    return X, y


@dataclass(frozen=True)
class NormalizationStats:
    means: np.ndarray
    stds: np.ndarray

    def apply(self, X):
        return (np.asarray(X, dtype=np.float64) - self.means) / self.stds

    def invert(self, Z):
        return np.asarray(Z) * self.stds + self.means


def fit_normalization(X) -> NormalizationStats:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("need a nonempty 2-D matrix")
    return NormalizationStats(X.mean(axis=0), np.maximum(X.std(axis=0), STD_FLOOR))


def split(X, y, test_ratio: float = 0.3, seed: int = 0):
    """Deterministic shuffled split -> (X_train, y_train, X_test, y_test)."""
    if not 0.0 < test_ratio < 1.0:
        raise DataError("test_ratio must lie in (0, 1)")
    n = len(y)
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(round(n * test_ratio))
    te, tr = perm[:n_test], perm[n_test:]
    return X[tr], y[tr], X[te], y[te]


# -- synthetic stand-in ---------------------------------------------------------

# Generator weights over standardized features, in FEATURE_NAMES order.  Signs
# follow the usual credit-risk story: high loan-to-income, high rates, renting
# and low grades raise default risk.
_TRUE_WEIGHTS = np.array([
    -0.10, -0.35, -0.15, 0.10, 0.45, 1.05, -0.05,    # numeric
    -0.30, 0.05, -0.45, 0.55,                         # home ownership
    -0.35, -0.25, 0.30, 0.20, -0.10, -0.30,           # loan intent
    -0.60, -0.30, 0.00, 0.40, 0.55, 0.60, 0.70,       # loan grade
    -0.10, 0.10,                                      # prior default
])
_TRUE_BIAS = -1.55


@dataclass(frozen=True)
class SyntheticTruth:
    weights: np.ndarray
    bias: float
    stats: NormalizationStats

    def probability(self, X) -> np.ndarray:
        z = self.stats.apply(X) @ self.weights + self.bias
        return 1.0 / (1.0 + np.exp(-z))


def _block_null_directions(stats: NormalizationStats) -> np.ndarray:
    """Directions along which standardized one-hot blocks are collinear."""
    dirs = []
    i = len(NUMERIC)
    for values in CATEGORIES.values():
        v = np.zeros(N_FEATURES)
        v[i:i + len(values)] = stats.stds[i:i + len(values)]
        dirs.append(v / np.linalg.norm(v))
        i += len(values)
    return np.stack(dirs)


def synthesize(n: int, seed: int = 0) -> tuple[list[RawRecord], SyntheticTruth]:
    """Draw ``n`` plausible records and labels from a known logistic model.

    The generator weights are projected off the one-hot collinearity
    directions so that they are identifiable from the data.
    """
    if n < 1:
        raise DataError("n must be at least 1")
    rng = np.random.default_rng(seed)
    age = np.clip(np.rint(20 + rng.gamma(2.0, 4.0, n)), 20, 94)
    income = np.rint(np.exp(rng.normal(10.95, 0.55, n)))
    home = rng.choice(CATEGORIES["person_home_ownership"], n, p=[0.41, 0.01, 0.08, 0.50])
    emp = np.clip(np.rint(rng.gamma(1.6, 3.0, n)), 0, 41)
    intent = rng.choice(CATEGORIES["loan_intent"], n, p=[0.16, 0.20, 0.11, 0.19, 0.17, 0.17])
    grade = rng.choice(CATEGORIES["loan_grade"], n, p=[0.33, 0.32, 0.20, 0.11, 0.03, 0.007, 0.003])
    gidx = np.searchsorted(np.array(CATEGORIES["loan_grade"]), grade)
    amount = np.clip(np.rint(np.exp(rng.normal(8.9, 0.65, n)) / 25) * 25, 500, 35000)
    rate = np.round(np.clip(7.5 + 2.6 * gidx + rng.normal(0, 1.0, n), 5.4, 23.2), 2)
    pct = np.round(np.minimum(amount / income, 0.83), 2)
    prior = np.where(rng.random(n) < 0.08 + 0.12 * (gidx >= 3), "Y", "N")
    hist = np.clip(np.rint(2 + (age - 20) * 0.45 + rng.normal(0, 1.5, n)), 2, 30)

    records = [
        RawRecord(float(age[i]), float(income[i]), str(home[i]), float(emp[i]), str(intent[i]),
                  str(grade[i]), float(amount[i]), float(rate[i]), float(pct[i]), str(prior[i]),
                  float(hist[i]), 0)
        for i in range(n)
    ]
    X, _ = expand_features(records)
    stats = fit_normalization(X)
    w = _TRUE_WEIGHTS.copy()
    for d in _block_null_directions(stats):
        w -= (w @ d) * d
    truth = SyntheticTruth(w, _TRUE_BIAS, stats)
    y = (rng.random(n) < truth.probability(X)).astype(int)
    records = [replace(r, loan_status=int(label)) for r, label in zip(records, y)]
    return records, truth
