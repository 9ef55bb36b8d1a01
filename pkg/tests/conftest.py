import csv
import os
from pathlib import Path

import pytest

from tabfusion.dataset import Schema
from tabfusion.synth import write_stroke_csv

STROKE_COLUMNS = (
    ("gender", "categorical"),
    ("age", "numeric"),
    ("hypertension", "binary"),
    ("heart_disease", "binary"),
    ("ever_married", "categorical"),
    ("work_type", "categorical"),
    ("Residence_type", "categorical"),
    ("avg_glucose_level", "numeric"),
    ("bmi", "numeric"),
    ("smoking_status", "categorical"),
    ("stroke", "target"),
)


@pytest.fixture(scope="session")
def stroke_schema() -> Schema:
    return Schema(columns=STROKE_COLUMNS, missing_token="N/A", positive_label="1")


@pytest.fixture(scope="session")
def stroke_csv(tmp_path_factory) -> Path:
    """Stroke-shaped data for the desk-scale runs.

    Defaults to the bundled synthetic generator; set STROKE_CSV to a real
    dataset file to run against it instead (an `id` column, if present, is
    dropped to match the shipped schema).
    """
    out = tmp_path_factory.mktemp("data") / "stroke.csv"
    override = os.environ.get("STROKE_CSV")
    if override:
        _copy_without_id(Path(override), out)
    else:
        write_stroke_csv(out)
    return out


def _copy_without_id(src: Path, dst: Path) -> None:
    with src.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    keep = [i for i, name in enumerate(rows[0]) if name != "id"]
    with dst.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow([row[i] for i in keep])
