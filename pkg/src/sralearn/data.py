"""CSV ingestion, schema handling, preprocessing, and fold splitting.

The preprocessing contract: numeric columns are standardized with the
training-split mean and population standard deviation (zero-variance
columns map to all zeros), categorical columns are one-hot encoded over
the fitted vocabulary (unseen categories become an all-zeros block), and
statistics are never refit on held-out data.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DataError, NotFittedError
from .rng import substream

Array = np.ndarray

KINDS = ("numeric", "categorical", "target")

MISSING_TOKEN = "<missing>"
# tokens (lowercased) treated as a missing numeric/categorical cell
_MISSING_STRINGS = {"", "na", "nan", "null"}


@dataclass(frozen=True)
class Column:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"column {self.name!r}: unknown kind {self.kind!r}")


class Schema:
    """Ordered column descriptors with exactly one target."""

    def __init__(self, columns: list[Column]):
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate column names in schema")
        targets = [c for c in columns if c.kind == "target"]
        if len(targets) != 1:
            raise ConfigError(f"schema needs exactly one target column, got {len(targets)}")
        self.columns = list(columns)
        self.target = targets[0].name

    @property
    def feature_columns(self) -> list[Column]:
        return [c for c in self.columns if c.kind != "target"]

    def __eq__(self, other) -> bool:
        return isinstance(other, Schema) and self.columns == other.columns

    @classmethod
    def numeric(cls, feature_names: list[str], target: str = "y") -> "Schema":
        cols = [Column(n, "numeric") for n in feature_names]
        return cls(cols + [Column(target, "target")])

    @classmethod
    def read(cls, path: str | os.PathLike) -> "Schema":
        columns = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                parts = [p.strip() for p in line.split(",")]
                if len(parts) != 2:
                    raise DataError("schema line must be 'name,kind'", row=lineno)
                columns.append(Column(parts[0], parts[1]))
        if not columns:
            raise DataError(f"empty schema file: {path}")
        return cls(columns)

    def write(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for col in self.columns:
                fh.write(f"{col.name},{col.kind}\n")


def _is_missing(token: str) -> bool:
    return token.strip().lower() in _MISSING_STRINGS


@dataclass
class TabularDataset:
    """Typed columns straight from a CSV, before encoding."""

    schema: Schema
    numeric: dict[str, Array]          # raw values, NaN where missing
    categorical: dict[str, list[str]]  # raw tokens, MISSING_TOKEN where missing
    y: Array
    source: str = ""

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def task(self) -> str:
        vals = np.unique(self.y)
        return "binary" if np.isin(vals, (0.0, 1.0)).all() else "regression"

    def feature_column(self, name: str) -> Array | list[str]:
        """Raw values of one feature column (used by CLI filters)."""
        if name in self.numeric:
            return self.numeric[name]
        if name in self.categorical:
            return self.categorical[name]
        raise DataError(f"unknown feature column {name!r}")

    def subset(self, indices: Array) -> "TabularDataset":
        idx = np.asarray(indices)
        return TabularDataset(
            schema=self.schema,
            numeric={k: v[idx] for k, v in self.numeric.items()},
            categorical={k: [v[i] for i in idx] for k, v in self.categorical.items()},
            y=self.y[idx],
            source=self.source,
        )


def load_csv(path: str | os.PathLike, schema: Schema) -> TabularDataset:
    """Parse a headered CSV into typed columns per the schema.

    Unparseable numeric tokens and ragged rows raise :class:`DataError`
    naming the 1-based data row and column.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty file: {path}") from None
        header = [h.strip() for h in header]
        missing_cols = [c.name for c in schema.columns if c.name not in header]
        if missing_cols:
            raise DataError(f"columns {missing_cols} not in CSV header {header}")
        positions = {c.name: header.index(c.name) for c in schema.columns}

        numeric: dict[str, list[float]] = {
            c.name: [] for c in schema.columns if c.kind == "numeric"
        }
        categorical: dict[str, list[str]] = {
            c.name: [] for c in schema.columns if c.kind == "categorical"
        }
        target: list[float] = []
        for rownum, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"expected {len(header)} fields, got {len(row)}", row=rownum
                )
            for col in schema.columns:
                token = row[positions[col.name]]
                if col.kind == "categorical":
                    categorical[col.name].append(
                        MISSING_TOKEN if _is_missing(token) else token.strip()
                    )
                    continue
                if _is_missing(token):
                    if col.kind == "target":
                        raise DataError("missing target value", row=rownum, column=col.name)
                    numeric[col.name].append(np.nan)
                    continue
                try:
                    value = float(token)
                except ValueError:
                    raise DataError(
                        f"cannot parse {token!r} as a number", row=rownum, column=col.name
                    ) from None
                if col.kind == "target":
                    target.append(value)
                else:
                    numeric[col.name].append(value)

    if not target:
        raise DataError(f"no data rows in {path}")
    return TabularDataset(
        schema=schema,
        numeric={k: np.asarray(v, dtype=np.float64) for k, v in numeric.items()},
        categorical=categorical,
        y=np.asarray(target, dtype=np.float64),
        source=str(path),
    )


@dataclass
class _NumericStats:
    mean: float
    std: float


class Preprocessor:
    """Standardizer + one-hot encoder fitted on a training split only."""

    def __init__(self, schema: Schema):
        self.schema = schema
        self._stats: dict[str, _NumericStats] = {}
        self._vocab: dict[str, list[str]] = {}
        self._fitted = False

    def fit(self, train: TabularDataset) -> "Preprocessor":
        if train.n == 0:
            raise DataError("cannot fit preprocessor on an empty split")
        self._stats.clear()
        self._vocab.clear()
        for col in self.schema.feature_columns:
            if col.kind == "numeric":
                values = train.numeric[col.name]
                observed = values[~np.isnan(values)]
                if observed.size == 0:
                    # entirely missing column: impute 0, zero variance
                    self._stats[col.name] = _NumericStats(0.0, 0.0)
                else:
                    self._stats[col.name] = _NumericStats(
                        float(observed.mean()), float(observed.std())
                    )
            else:
                self._vocab[col.name] = sorted(set(train.categorical[col.name]))
        self._fitted = True
        return self

    def _require_fitted(self):
        if not self._fitted:
            raise NotFittedError("preprocessor used before fit")

    @property
    def feature_names(self) -> list[str]:
        self._require_fitted()
        names: list[str] = []
        for col in self.schema.feature_columns:
            if col.kind == "numeric":
                names.append(col.name)
            else:
                names.extend(f"{col.name}={v}" for v in self._vocab[col.name])
        return names

    @property
    def width(self) -> int:
        return len(self.feature_names)

    def transform(self, data: TabularDataset) -> Array:
        self._require_fitted()
        blocks: list[Array] = []
        for col in self.schema.feature_columns:
            if col.kind == "numeric":
                stats = self._stats[col.name]
                values = data.numeric[col.name]
                filled = np.where(np.isnan(values), stats.mean, values)
                if stats.std == 0.0:
                    blocks.append(np.zeros((data.n, 1)))
                else:
                    blocks.append(((filled - stats.mean) / stats.std)[:, None])
            else:
                vocab = self._vocab[col.name]
                index = {v: i for i, v in enumerate(vocab)}
                block = np.zeros((data.n, len(vocab)))
                for r, token in enumerate(data.categorical[col.name]):
                    i = index.get(token)
                    if i is not None:  # unseen category stays all zeros
                        block[r, i] = 1.0
                blocks.append(block)
        return np.hstack(blocks) if blocks else np.zeros((data.n, 0))

    def fit_transform(self, train: TabularDataset) -> Array:
        return self.fit(train).transform(train)

    # -- persistence ------------------------------------------------------

    def to_json(self) -> str:
        self._require_fitted()
        payload = {
            "schema": [[c.name, c.kind] for c in self.schema.columns],
            "stats": {k: [v.mean, v.std] for k, v in self._stats.items()},
            "vocab": self._vocab,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Preprocessor":
        payload = json.loads(text)
        schema = Schema([Column(n, k) for n, k in payload["schema"]])
        pre = cls(schema)
        pre._stats = {k: _NumericStats(m, s) for k, (m, s) in payload["stats"].items()}
        pre._vocab = {k: list(v) for k, v in payload["vocab"].items()}
        pre._fitted = True
        return pre

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Preprocessor":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


# -- splitting -------------------------------------------------------------


def _dealt_folds(groups: list[Array], k: int) -> list[Array]:
    """Round-robin deal the (pre-shuffled) groups into k fold buckets.

    The deal counter continues across groups so total fold sizes stay
    within one of each other while each group also spreads evenly.
    """
    buckets: list[list[int]] = [[] for _ in range(k)]
    cursor = 0
    for group in groups:
        for idx in group:
            buckets[cursor % k].append(int(idx))
            cursor += 1
    return [np.sort(np.asarray(b, dtype=np.int64)) for b in buckets]


def stratified_kfold(y: Array, k: int, seed: int) -> list[tuple[Array, Array]]:
    """k disjoint (train, test) index splits preserving class balance.

    Indices are grouped by class, shuffled within class under the seed,
    and dealt round-robin, so per-fold class counts differ by at most one.
    """
    y = np.asarray(y)
    n = len(y)
    if k < 2:
        raise ConfigError(f"fold count must be >= 2, got {k}")
    if k > n:
        raise DataError(f"cannot split {n} rows into {k} folds")
    groups = []
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        rng = substream(seed, f"fold/class={cls!r}")
        groups.append(members[rng.permutation(len(members))])
    tests = _dealt_folds(groups, k)
    everything = np.arange(n)
    return [(np.setdiff1d(everything, t), t) for t in tests]


def kfold(n: int, k: int, seed: int) -> list[tuple[Array, Array]]:
    """Unstratified variant for regression targets."""
    if k < 2:
        raise ConfigError(f"fold count must be >= 2, got {k}")
    if k > n:
        raise DataError(f"cannot split {n} rows into {k} folds")
    rng = substream(seed, "fold/plain")
    shuffled = rng.permutation(n)
    tests = _dealt_folds([shuffled], k)
    everything = np.arange(n)
    return [(np.setdiff1d(everything, t), t) for t in tests]


def folds_for(y: Array, k: int, seed: int, task: str) -> list[tuple[Array, Array]]:
    if task == "binary":
        return stratified_kfold(y, k, seed)
    return kfold(len(y), k, seed)


def train_val_split(y: Array, fraction: float, seed: int,
                    stratify: bool) -> tuple[Array, Array]:
    """Carve an early-stopping validation subset out of a training split."""
    if not 0.0 < fraction <= 0.5:
        raise ConfigError(f"validation fraction must be in (0, 0.5], got {fraction}")
    y = np.asarray(y)
    n = len(y)
    n_val = max(1, int(round(n * fraction)))
    if n_val >= n:
        raise DataError(f"validation split would consume all {n} rows")
    if stratify:
        val_parts = []
        for cls in np.unique(y):
            members = np.flatnonzero(y == cls)
            rng = substream(seed, f"valsplit/class={cls!r}")
            take = int(round(len(members) * fraction))
            take = min(max(take, 1 if len(members) > 1 else 0), len(members) - 1)
            val_parts.append(rng.permutation(members)[:take])
        val = np.sort(np.concatenate(val_parts)) if val_parts else np.array([], dtype=int)
    else:
        rng = substream(seed, "valsplit/plain")
        val = np.sort(rng.permutation(n)[:n_val])
    train = np.setdiff1d(np.arange(n), val)
    if len(val) == 0 or len(train) == 0:
        raise DataError("validation split produced an empty side")
    return train, val
