"""Schema-declared CSV ingestion and train-fitted preprocessing.

All statistics (imputation values, vocabularies, scaling parameters) are fit
on the training partition only and then applied unchanged to any other
partition, so train and test always see the same transformation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

COLUMN_KINDS = ("numeric", "categorical", "binary", "target")


class DataError(ValueError):
    """Malformed input data, schema violation, or transform misuse."""


@dataclass(frozen=True)
class Schema:
    """Ordered column kinds plus the tokens needed to interpret raw cells."""

    columns: tuple[tuple[str, str], ...]
    missing_token: str = "N/A"
    positive_label: str = "1"

    def __post_init__(self):
        names = [name for name, _ in self.columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names in schema")
        for name, kind in self.columns:
            if kind not in COLUMN_KINDS:
                raise DataError(f"unknown column kind {kind!r} for column {name!r}")
        targets = [name for name, kind in self.columns if kind == "target"]
        if len(targets) != 1:
            raise DataError(f"schema must declare exactly one target column, found {targets}")

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.columns)

    @property
    def target(self) -> str:
        return next(name for name, kind in self.columns if kind == "target")

    def names_of(self, kind: str) -> tuple[str, ...]:
        return tuple(name for name, k in self.columns if k == kind)


@dataclass(frozen=True)
class TabularDataset:
    """Raw rows (cell texts, schema order) under a declared schema."""

    schema: Schema
    rows: tuple[tuple[str, ...], ...]

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> tuple[str, ...]:
        j = self.schema.column_names.index(name)
        return tuple(row[j] for row in self.rows)

    def labels(self) -> np.ndarray:
        """0/1 labels: 1 where the target cell equals positive_label."""
        j = self.schema.column_names.index(self.schema.target)
        pos = self.schema.positive_label
        return np.fromiter((1 if row[j] == pos else 0 for row in self.rows), dtype=np.int64, count=self.n_rows)


def load_csv(path, schema: Schema) -> TabularDataset:
    """Read a headered CSV and normalize its columns to schema order.

    Cells are kept verbatim; no coercion happens here.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty file: {path}") from None
        if set(header) != set(schema.column_names) or len(header) != len(schema.column_names):
            missing = sorted(set(schema.column_names) - set(header))
            extra = sorted(set(header) - set(schema.column_names))
            raise DataError(
                f"header does not match schema: missing columns {missing}, unexpected columns {extra}"
            )
        perm = [header.index(name) for name in schema.column_names]
        rows = []
        for row_number, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DataError(f"row {row_number}: expected {len(header)} cells, got {len(row)}")
            rows.append(tuple(row[j] for j in perm))
    return TabularDataset(schema=schema, rows=tuple(rows))


def stratified_split(
    ds: TabularDataset, test_fraction: float, seed: int
) -> tuple[TabularDataset, TabularDataset]:
    """Class-proportional train/test partition, deterministic for a fixed seed."""
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    y = ds.labels()
    if y.size == 0 or y.min() == y.max():
        raise DataError("stratified split requires both classes to be present")
    rng = np.random.default_rng(seed)
    test_indices = []
    for cls in (0, 1):
        members = np.nonzero(y == cls)[0]
        n_test = round(len(members) * test_fraction)
        if n_test < 1 or n_test >= len(members):
            raise DataError(
                f"test_fraction={test_fraction} leaves class {cls} empty on one side"
            )
        test_indices.append(rng.permutation(members)[:n_test])
    mask = np.zeros(ds.n_rows, dtype=bool)
    mask[np.concatenate(test_indices)] = True
    train_rows = tuple(ds.rows[i] for i in range(ds.n_rows) if not mask[i])
    test_rows = tuple(ds.rows[i] for i in range(ds.n_rows) if mask[i])
    return TabularDataset(ds.schema, train_rows), TabularDataset(ds.schema, test_rows)


@dataclass(frozen=True)
class NumericStats:
    impute_value: float
    mean: float
    std: float
    scaled: bool  # binary 0/1 columns pass through unscaled


@dataclass(frozen=True)
class FittedTransform:
    """Train-set statistics applied identically to every partition.

    Categorical vocabularies reserve index 0 for out-of-vocabulary and
    missing values; observed values are indexed 1..len(vocab).
    """

    schema: Schema
    encoding_mode: str  # "one_hot" | "label"
    numeric_stats: dict[str, NumericStats]
    vocabs: dict[str, dict[str, int]]


@dataclass(frozen=True)
class DesignMatrix:
    """Numeric views of one partition: dense features, categorical indices, labels."""

    dense: np.ndarray  # (n, D) float64; z-scored numerics, 0/1 binaries, one-hot blocks
    cat_indices: np.ndarray  # (n, N) int64 label-encoded categoricals, 0 = OOV/missing
    labels: np.ndarray  # (n,) int64 in {0, 1}
    dense_names: tuple[str, ...]
    cat_cardinalities: tuple[int, ...]  # vocab sizes including the reserved OOV index


def _parse_number(cell: str, column: str, row_number: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataError(
            f"row {row_number}: cannot parse {cell!r} as a number in column {column!r}"
        ) from None
    if not np.isfinite(value):
        raise DataError(f"row {row_number}: non-finite value {cell!r} in column {column!r}")
    return value


def fit_transform(train: TabularDataset, encoding_mode: str = "one_hot") -> tuple[FittedTransform, DesignMatrix]:
    """Fit imputation/scaling/vocabulary statistics on the training partition.

    Numerics are imputed with the train median, then z-scored with the
    mean/std of the imputed column (population std; constant columns keep
    std = 1 so their output is 0). Binary columns are imputed with the train
    majority value and left unscaled. Label indices are always emitted;
    one-hot blocks are appended to the dense matrix when encoding_mode is
    "one_hot".
    """
    if train.n_rows == 0:
        raise DataError("cannot fit a transform on an empty dataset")
    if encoding_mode not in ("one_hot", "label"):
        raise DataError(f"encoding_mode must be 'one_hot' or 'label', got {encoding_mode!r}")
    missing = train.schema.missing_token
    numeric_stats: dict[str, NumericStats] = {}
    vocabs: dict[str, dict[str, int]] = {}
    for name, kind in train.schema.columns:
        cells = train.column(name)
        if kind == "numeric":
            observed = [
                _parse_number(c, name, i + 1) for i, c in enumerate(cells) if c != missing
            ]
            if not observed:
                raise DataError(f"numeric column {name!r} has no non-missing values")
            impute = float(np.median(observed))
            filled = np.array(
                [impute if c == missing else _parse_number(c, name, i + 1) for i, c in enumerate(cells)]
            )
            std = float(filled.std())
            numeric_stats[name] = NumericStats(
                impute_value=impute,
                mean=float(filled.mean()),
                std=std if std > 0.0 else 1.0,
                scaled=True,
            )
        elif kind == "binary":
            observed = [
                _parse_number(c, name, i + 1) for i, c in enumerate(cells) if c != missing
            ]
            if not observed:
                raise DataError(f"binary column {name!r} has no non-missing values")
            if any(v not in (0.0, 1.0) for v in observed):
                raise DataError(f"binary column {name!r} contains values outside {{0, 1}}")
            ones = sum(observed)
            majority = 1.0 if ones > len(observed) - ones else 0.0
            numeric_stats[name] = NumericStats(impute_value=majority, mean=0.0, std=1.0, scaled=False)
        elif kind == "categorical":
            vocab: dict[str, int] = {}
            for c in cells:
                if c != missing and c not in vocab:
                    vocab[c] = len(vocab) + 1
            vocabs[name] = vocab
    ft = FittedTransform(
        schema=train.schema,
        encoding_mode=encoding_mode,
        numeric_stats=numeric_stats,
        vocabs=vocabs,
    )
    return ft, apply_transform(ft, train)


def apply_transform(ft: FittedTransform, ds: TabularDataset) -> DesignMatrix:
    """Encode a dataset using train statistics only; unseen categories map to index 0."""
    if ds.schema != ft.schema:
        raise DataError("dataset schema does not match the schema the transform was fit on")
    n = ds.n_rows
    missing = ft.schema.missing_token
    dense_cols: list[np.ndarray] = []
    dense_names: list[str] = []
    for name, kind in ft.schema.columns:
        if kind not in ("numeric", "binary"):
            continue
        stats = ft.numeric_stats[name]
        cells = ds.column(name)
        col = np.array(
            [
                stats.impute_value if c == missing else _parse_number(c, name, i + 1)
                for i, c in enumerate(cells)
            ]
        )
        if stats.scaled:
            col = (col - stats.mean) / stats.std
        dense_cols.append(col)
        dense_names.append(name)
    cat_cols: list[np.ndarray] = []
    cardinalities: list[int] = []
    onehot_blocks: list[np.ndarray] = []
    for name, kind in ft.schema.columns:
        if kind != "categorical":
            continue
        vocab = ft.vocabs[name]
        idx = np.fromiter(
            (vocab.get(c, 0) for c in ds.column(name)), dtype=np.int64, count=n
        )
        cat_cols.append(idx)
        cardinalities.append(len(vocab) + 1)
        if ft.encoding_mode == "one_hot":
            block = np.zeros((n, len(vocab)))
            seen = idx > 0
            block[np.nonzero(seen)[0], idx[seen] - 1] = 1.0
            onehot_blocks.append(block)
            dense_names.extend(f"{name}={value}" for value in vocab)
    all_cols = dense_cols + onehot_blocks
    dense = np.column_stack(all_cols) if all_cols else np.zeros((n, 0))
    if not np.all(np.isfinite(dense)):
        raise DataError("dense matrix contains non-finite entries")
    cat_indices = (
        np.column_stack(cat_cols) if cat_cols else np.zeros((n, 0), dtype=np.int64)
    )
    return DesignMatrix(
        dense=dense,
        cat_indices=cat_indices,
        labels=ds.labels(),
        dense_names=tuple(dense_names),
        cat_cardinalities=tuple(cardinalities),
    )


def transform_to_dict(ft: FittedTransform) -> dict:
    """JSON-ready form; vocab order is preserved via pair lists."""
    return {
        "schema": {
            "columns": [[name, kind] for name, kind in ft.schema.columns],
            "missing_token": ft.schema.missing_token,
            "positive_label": ft.schema.positive_label,
        },
        "encoding_mode": ft.encoding_mode,
        "numeric_stats": {
            name: {
                "impute_value": s.impute_value,
                "mean": s.mean,
                "std": s.std,
                "scaled": s.scaled,
            }
            for name, s in ft.numeric_stats.items()
        },
        "vocabs": {name: [[value, index] for value, index in vocab.items()] for name, vocab in ft.vocabs.items()},
    }


def transform_from_dict(d: dict) -> FittedTransform:
    schema = Schema(
        columns=tuple((name, kind) for name, kind in d["schema"]["columns"]),
        missing_token=d["schema"]["missing_token"],
        positive_label=d["schema"]["positive_label"],
    )
    return FittedTransform(
        schema=schema,
        encoding_mode=d["encoding_mode"],
        numeric_stats={
            name: NumericStats(
                impute_value=s["impute_value"], mean=s["mean"], std=s["std"], scaled=s["scaled"]
            )
            for name, s in d["numeric_stats"].items()
        },
        vocabs={name: {value: index for value, index in pairs} for name, pairs in d["vocabs"].items()},
    )
