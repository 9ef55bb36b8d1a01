"""Deterministic generator for a stroke-risk-shaped tabular dataset.

Column names, value sets, and rough marginals mirror the public stroke
prediction CSV layout (including "N/A" gaps in bmi), so the shipped schema
config applies unchanged. The label follows a smooth logistic risk dominated
by age with vascular-history and glucose contributions, which keeps the task
learnable at desk scale without shipping third-party data.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

STROKE_HEADER = (
    "gender",
    "age",
    "hypertension",
    "heart_disease",
    "ever_married",
    "work_type",
    "Residence_type",
    "avg_glucose_level",
    "bmi",
    "smoking_status",
    "stroke",
)

DEFAULT_N_ROWS = 5110
DEFAULT_SEED = 20240501


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def sample_stroke_rows(n_rows: int = DEFAULT_N_ROWS, seed: int = DEFAULT_SEED) -> list[tuple[str, ...]]:
    rng = np.random.default_rng(seed)
    age = rng.uniform(0.5, 82.0, n_rows)
    gender = rng.choice(["Female", "Male", "Other"], size=n_rows, p=[0.586, 0.413, 0.001])
    hypertension = (rng.random(n_rows) < _sigmoid(-4.6 + 0.044 * age)).astype(int)
    heart_disease = (rng.random(n_rows) < _sigmoid(-5.8 + 0.055 * age)).astype(int)
    ever_married = np.where(rng.random(n_rows) < _sigmoid(0.25 * (age - 28.0)), "Yes", "No")

    work = rng.choice(
        ["Private", "Self-employed", "Govt_job", "Never_worked"],
        size=n_rows,
        p=[0.645, 0.185, 0.165, 0.005],
    )
    work = np.where(age < 16.0, "children", work)
    residence = rng.choice(["Urban", "Rural"], size=n_rows, p=[0.508, 0.492])

    diabetic = rng.random(n_rows) < _sigmoid(-4.3 + 0.035 * age)
    glucose = rng.normal(92.0, 14.0, n_rows) + diabetic * rng.uniform(45.0, 140.0, n_rows)
    glucose = np.clip(glucose, 55.0, 275.0)

    bmi = rng.normal(22.0 + 8.0 * _sigmoid(0.12 * (age - 15.0)), 6.5)
    bmi = np.clip(bmi, 12.0, 70.0)
    bmi_missing = rng.random(n_rows) < 0.039

    smoking = rng.choice(
        ["never smoked", "formerly smoked", "smokes", "Unknown"],
        size=n_rows,
        p=[0.45, 0.22, 0.18, 0.15],
    )
    smoking = np.where(age < 10.0, "Unknown", smoking)

    risk = (
        -7.9
        + 0.082 * age
        + 0.45 * hypertension
        + 0.50 * heart_disease
        + 0.004 * (glucose - 100.0)
        + 0.25 * (smoking == "smokes")
        + 0.10 * (smoking == "formerly smoked")
        + 0.010 * (bmi - 29.0)
    )
    stroke = (rng.random(n_rows) < _sigmoid(risk)).astype(int)

    rows = []
    for i in range(n_rows):
        rows.append(
            (
                str(gender[i]),
                f"{age[i]:.2f}",
                str(int(hypertension[i])),
                str(int(heart_disease[i])),
                str(ever_married[i]),
                str(work[i]),
                str(residence[i]),
                f"{glucose[i]:.2f}",
                "N/A" if bmi_missing[i] else f"{bmi[i]:.1f}",
                str(smoking[i]),
                str(int(stroke[i])),
            )
        )
    return rows


def write_stroke_csv(path, n_rows: int = DEFAULT_N_ROWS, seed: int = DEFAULT_SEED) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(STROKE_HEADER)]
    lines += [",".join(row) for row in sample_stroke_rows(n_rows, seed)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
