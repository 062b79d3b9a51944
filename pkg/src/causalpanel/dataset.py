"""Entity-by-date panel data: ingest, validation, transforms, splits, scaling.

A panel is stored densely as an ``(entities, dates, variables)`` array. Rows
are implicitly ordered by entity, then date, which is also the order used for
every pooled matrix built downstream.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from .errors import (
    DateGapError,
    DuplicateKeyError,
    MissingCellError,
    MissingColumnError,
    NonFiniteValueError,
    SchemaError,
    SplitError,
    TransformError,
    UnknownColumnError,
    ValidationError,
)

ROLES = ("dependent", "predictor")
KINDS = ("continuous", "binary")
TRANSFORMS = ("none", "log")
_TRANSFORM_ALIASES = {"none": "none", "log": "log", "ln": "log", "natural-log": "log", "natural_log": "log"}

ONE_DAY = dt.timedelta(days=1)


@dataclass(frozen=True)
class VariableSpec:
    name: str
    role: str = "predictor"
    transform: str = "none"
    kind: str = "continuous"

    def __post_init__(self):
        if not self.name or self.name in ("entity", "date"):
            raise SchemaError(f"invalid variable name {self.name!r}")
        if self.role not in ROLES:
            raise SchemaError(f"variable {self.name!r}: role must be one of {ROLES}, got {self.role!r}")
        transform = _TRANSFORM_ALIASES.get(str(self.transform).lower())
        if transform is None:
            raise SchemaError(f"variable {self.name!r}: unknown transform {self.transform!r}")
        object.__setattr__(self, "transform", transform)
        if self.kind not in KINDS:
            raise SchemaError(f"variable {self.name!r}: kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "binary" and self.transform != "none":
            raise SchemaError(f"variable {self.name!r}: binary variables cannot be log-transformed")

    def to_dict(self) -> dict:
        return {"role": self.role, "transform": self.transform, "kind": self.kind}


def validate_schema(schema: Sequence[VariableSpec]) -> tuple[VariableSpec, ...]:
    schema = tuple(schema)
    if not schema:
        raise SchemaError("schema declares no variables")
    names = [v.name for v in schema]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise SchemaError(f"duplicate variable names in schema: {dupes}")
    n_dep = sum(v.role == "dependent" for v in schema)
    if n_dep != 1:
        raise SchemaError(f"schema must declare exactly one dependent variable, found {n_dep}")
    return schema


def load_schema(path: str | Path) -> tuple[VariableSpec, ...]:
    """Read a YAML schema mapping variable name -> {role, transform, kind}.

    The mapping may sit at the top level or under a ``variables`` key; its
    order fixes the variable order of every dataset ingested with it.
    """
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if isinstance(raw, dict) and "variables" in raw:
        raw = raw["variables"]
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: schema must be a mapping of variable name to attributes")
    specs = []
    for name, attrs in raw.items():
        attrs = attrs or {}
        if not isinstance(attrs, dict):
            raise SchemaError(f"{path}: attributes of {name!r} must be a mapping")
        unknown = set(attrs) - {"role", "transform", "kind"}
        if unknown:
            raise SchemaError(f"{path}: variable {name!r} has unknown keys {sorted(unknown)}")
        specs.append(VariableSpec(str(name), **attrs))
    return validate_schema(specs)


def write_schema(schema: Sequence[VariableSpec], path: str | Path) -> None:
    doc = {"variables": {v.name: v.to_dict() for v in schema}}
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def daily_dates(start: dt.date | str, n: int) -> tuple[dt.date, ...]:
    start = _as_date(start)
    return tuple(start + i * ONE_DAY for i in range(n))


def _as_date(value) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    try:
        return dt.date.fromisoformat(str(value))
    except ValueError as exc:
        raise ValidationError(f"invalid ISO-8601 date {value!r}") from exc


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Dense panel of ``values[entity, date, variable]``.

    Immutable: the value array is flagged read-only at construction.
    """

    entities: tuple[str, ...]
    dates: tuple[dt.date, ...]
    variables: tuple[VariableSpec, ...]
    values: np.ndarray
    transformed: bool = False

    def __post_init__(self):
        entities = tuple(str(e) for e in self.entities)
        dates = tuple(_as_date(d) for d in self.dates)
        variables = validate_schema(self.variables)
        values = np.array(self.values, dtype=float, copy=True)
        object.__setattr__(self, "entities", entities)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "variables", variables)

        if not entities:
            raise ValidationError("panel has no entities")
        if len(set(entities)) != len(entities):
            raise ValidationError("duplicate entity identifiers")
        if not dates:
            raise ValidationError("panel has no dates")
        for prev, cur in zip(dates, dates[1:]):
            if cur - prev != ONE_DAY:
                raise DateGapError(f"dates must be consecutive days: {prev} is followed by {cur}")
        shape = (len(entities), len(dates), len(variables))
        if values.shape != shape:
            raise ValidationError(f"value array has shape {values.shape}, expected {shape}")
        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            e, d, v = bad[0]
            raise NonFiniteValueError(
                f"non-finite value at entity={entities[e]}, date={dates[d]}, variable={variables[v].name}"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    # -- lookup ---------------------------------------------------------------
    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def dependent(self) -> str:
        return next(v.name for v in self.variables if v.role == "dependent")

    @property
    def predictors(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.role == "predictor")

    @property
    def n_rows(self) -> int:
        return len(self.entities) * len(self.dates)

    def spec(self, name: str) -> VariableSpec:
        return self.variables[self.index(name)]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValidationError(f"unknown variable {name!r}") from None

    def select(self, names: Iterable[str]) -> np.ndarray:
        """Return an ``(entities, dates, len(names))`` view of the requested variables."""
        idx = [self.index(n) for n in names]
        return self.values[:, :, idx]

    def column(self, name: str) -> np.ndarray:
        """Pooled column in (entity, date) row order."""
        return self.values[:, :, self.index(name)].reshape(-1)

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        return self.select(names).reshape(self.n_rows, len(names))

    def row_index(self) -> list[tuple[str, dt.date]]:
        return [(e, d) for e in self.entities for d in self.dates]

    # -- derived datasets -------------------------------------------------------
    def with_values(self, values: np.ndarray, **changes) -> "PanelDataset":
        return replace(self, values=values, **changes)

    def date_slice(self, start: dt.date, end: dt.date) -> "PanelDataset":
        """Sub-panel over the inclusive date window ``[start, end]``."""
        start, end = _as_date(start), _as_date(end)
        keep = [i for i, d in enumerate(self.dates) if start <= d <= end]
        if not keep:
            raise SplitError(f"no dates in window [{start}, {end}]")
        return replace(self, dates=tuple(self.dates[i] for i in keep), values=self.values[:, keep, :])

    def subset_variables(self, names: Sequence[str]) -> "PanelDataset":
        names = list(names)
        if self.dependent not in names:
            names = [self.dependent] + names
        idx = [self.index(n) for n in names]
        return replace(self, variables=tuple(self.variables[i] for i in idx), values=self.values[:, :, idx])

    @classmethod
    def from_array(
        cls,
        values: np.ndarray,
        variables: Sequence[VariableSpec],
        entities: Sequence[str] | None = None,
        dates: Sequence[dt.date] | None = None,
        start: dt.date | str = "2020-01-01",
    ) -> "PanelDataset":
        values = np.asarray(values, dtype=float)
        if values.ndim == 2:
            values = values[None, :, :]
        if entities is None:
            entities = [f"e{i:03d}" for i in range(values.shape[0])]
        if dates is None:
            dates = daily_dates(start, values.shape[1])
        return cls(tuple(entities), tuple(dates), tuple(variables), values)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["entity", "date", *self.names])
            for ei, entity in enumerate(self.entities):
                for di, date in enumerate(self.dates):
                    writer.writerow([entity, date.isoformat(), *(repr(float(x)) for x in self.values[ei, di])])


def ingest_csv(path: str | Path, schema: Sequence[VariableSpec]) -> PanelDataset:
    """Load and validate a long-format ``entity,date,<vars...>`` CSV.

    Every problem is reported with the file line number and the offending
    column so the source can be fixed; nothing is imputed.
    """
    schema = validate_schema(schema)
    names = [v.name for v in schema]
    kinds = {v.name: v.kind for v in schema}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        for required in ("entity", "date"):
            if required not in header:
                raise MissingColumnError(f"{path}: header lacks mandatory column {required!r}")
        for col in header:
            if col not in names and col not in ("entity", "date"):
                raise UnknownColumnError(f"{path}: line 1: column {col!r} is not declared in the schema")
        missing = [n for n in names if n not in header]
        if missing:
            raise MissingColumnError(f"{path}: schema variables absent from header: {missing}")
        if len(set(header)) != len(header):
            raise UnknownColumnError(f"{path}: line 1: duplicate column names in header")
        pos = {h: i for i, h in enumerate(header)}

        records: dict[tuple[str, dt.date], list[float]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise MissingCellError(f"{path}: line {lineno}: expected {len(header)} cells, found {len(row)}")
            entity = row[pos["entity"]].strip()
            if not entity:
                raise MissingCellError(f"{path}: line {lineno}: blank cell in column 'entity'")
            raw_date = row[pos["date"]].strip()
            if not raw_date:
                raise MissingCellError(f"{path}: line {lineno}: blank cell in column 'date' (entity={entity})")
            try:
                date = dt.date.fromisoformat(raw_date)
            except ValueError:
                raise ValidationError(f"{path}: line {lineno}: column 'date': invalid date {raw_date!r}") from None
            key = (entity, date)
            if key in records:
                raise DuplicateKeyError(f"{path}: line {lineno}: duplicate row for entity={entity}, date={date}")
            vals = []
            for name in names:
                cell = row[pos[name]].strip()
                where = f"{path}: line {lineno}: entity={entity}, date={date}, variable={name}"
                if not cell:
                    raise MissingCellError(f"{where}: blank cell")
                try:
                    x = float(cell)
                except ValueError:
                    raise ValidationError(f"{where}: not a number: {cell!r}") from None
                if not math.isfinite(x):
                    raise NonFiniteValueError(f"{where}: non-finite value {cell!r}")
                if kinds[name] == "binary" and x not in (0.0, 1.0):
                    raise ValidationError(f"{where}: binary variable must be 0 or 1, got {cell!r}")
                vals.append(x)
            records[key] = vals

    if not records:
        raise ValidationError(f"{path}: no data rows")
    entities = sorted({e for e, _ in records})
    all_dates = sorted({d for _, d in records})
    for prev, cur in zip(all_dates, all_dates[1:]):
        if cur - prev != ONE_DAY:
            raise DateGapError(f"{path}: dates jump from {prev} to {cur}; only consecutive daily data is accepted")
    values = np.empty((len(entities), len(all_dates), len(names)))
    for ei, entity in enumerate(entities):
        for di, date in enumerate(all_dates):
            try:
                values[ei, di] = records[(entity, date)]
            except KeyError:
                raise MissingCellError(
                    f"{path}: no row for entity={entity}, date={date} (all variables missing)"
                ) from None
    return PanelDataset(tuple(entities), tuple(all_dates), schema, values)


def apply_transforms(data: PanelDataset) -> PanelDataset:
    """Replace every log-flagged variable by its natural logarithm."""
    if data.transformed:
        raise TransformError("transforms were already applied to this dataset")
    values = np.array(data.values)
    for vi, spec in enumerate(data.variables):
        if spec.transform != "log":
            continue
        col = values[:, :, vi]
        bad = np.argwhere(col <= 0)
        if bad.size:
            e, d = bad[0]
            raise TransformError(
                f"natural log of non-positive value {col[e, d]!r} at entity={data.entities[e]}, "
                f"date={data.dates[d]}, variable={spec.name}"
            )
        values[:, :, vi] = np.log(col)
    return data.with_values(values, transformed=True)


def to_original_scale(spec: VariableSpec, values: np.ndarray) -> np.ndarray:
    """Undo the variable's transform (identity for ``none``)."""
    values = np.asarray(values, dtype=float)
    return np.exp(values) if spec.transform == "log" else values


@dataclass(frozen=True)
class SplitSpec:
    train_end: dt.date
    test_start: dt.date
    test_end: dt.date

    def __post_init__(self):
        for name in ("train_end", "test_start", "test_end"):
            object.__setattr__(self, name, _as_date(getattr(self, name)))
        if not self.train_end < self.test_start <= self.test_end:
            raise SplitError(
                f"split requires train_end < test_start <= test_end, got "
                f"{self.train_end}, {self.test_start}, {self.test_end}"
            )

    def check(self, dates: Sequence[dt.date]) -> None:
        first, last = dates[0], dates[-1]
        if self.train_end < first:
            raise SplitError(f"training window ends {self.train_end}, before the first date {first}")
        if self.test_end > last:
            raise SplitError(f"test window ends {self.test_end}, after the last date {last}")


def split_by_date(data: PanelDataset, spec: SplitSpec) -> tuple[PanelDataset, PanelDataset]:
    """Return ``(train, test)``: dates up to ``train_end`` and ``[test_start, test_end]``."""
    spec.check(data.dates)
    train = data.date_slice(data.dates[0], spec.train_end)
    test = data.date_slice(spec.test_start, spec.test_end)
    return train, test


@dataclass(frozen=True, eq=False)
class StandardizationParams:
    """Per-column affine maps ``z = (x - mean) / scale``.

    Exempt columns (binary indicators) carry ``mean=0, scale=1``.
    """

    names: tuple[str, ...]
    means: np.ndarray
    scales: np.ndarray
    exempt: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "exempt", tuple(self.exempt))
        object.__setattr__(self, "means", np.asarray(self.means, dtype=float).copy())
        object.__setattr__(self, "scales", np.asarray(self.scales, dtype=float).copy())

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.means) / self.scales

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.scales + self.means

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "means": [float(m) for m in self.means],
            "scales": [float(s) for s in self.scales],
            "exempt": list(self.exempt),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizationParams":
        return cls(tuple(d["names"]), np.array(d["means"]), np.array(d["scales"]), tuple(d.get("exempt", ())))

    @classmethod
    def identity(cls, names: Sequence[str]) -> "StandardizationParams":
        n = len(names)
        return cls(tuple(names), np.zeros(n), np.ones(n), tuple(names))


def fit_standardization(
    X: np.ndarray, names: Sequence[str], exempt: Sequence[str] = ()
) -> StandardizationParams:
    """Column means and population standard deviations of ``X``."""
    X = np.asarray(X, dtype=float)
    names = tuple(names)
    means = X.mean(axis=0)
    scales = X.std(axis=0)
    for j, name in enumerate(names):
        if name in exempt:
            means[j], scales[j] = 0.0, 1.0
        elif not scales[j] > 0:
            raise ValidationError(f"variable {name!r} has zero variance on the fitting data; cannot standardize")
    return StandardizationParams(names, means, scales, tuple(n for n in names if n in exempt))


def standardize_fit(
    data: PanelDataset, vars: Sequence[str] | None = None, exempt_binary: bool = True
) -> StandardizationParams:
    names = tuple(vars) if vars is not None else data.names
    exempt = [n for n in names if exempt_binary and data.spec(n).kind == "binary"]
    return fit_standardization(data.matrix(names), names, exempt)


def _remap(data: PanelDataset, params: StandardizationParams, fn) -> PanelDataset:
    values = np.array(data.values)
    idx = [data.index(n) for n in params.names]
    flat = values[:, :, idx].reshape(-1, len(idx))
    values[:, :, idx] = fn(flat).reshape(values.shape[0], values.shape[1], len(idx))
    return data.with_values(values)


def standardize_apply(params: StandardizationParams, data: PanelDataset) -> PanelDataset:
    return _remap(data, params, params.transform)


def unstandardize(params: StandardizationParams, data: PanelDataset) -> PanelDataset:
    return _remap(data, params, params.inverse)
