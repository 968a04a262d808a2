"""Observational data model: CSV ingestion, validation, fold assignment.

A dataset is a column store of (Y, A, S, X) with optional cross-fitting fold
labels. Arrays are frozen after construction so datasets can be shared
read-only across parallel workers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DataValidationError, ParameterError, SchemaError

_MAX_REPORTED_ROWS = 20


@dataclass(frozen=True)
class ColumnSchema:
    """Maps CSV columns to roles.

    ``treatment_positive`` / ``sensitive_positive`` name the raw cell value
    coded as 1 (the other observed value is coded 0). When omitted the column
    must already contain literal 0/1. The optional ``*_negative`` fields pin
    the value coded as 0; any third value is then a validation error either
    way.
    """

    outcome: str
    treatment: str
    sensitive: str
    covariates: tuple[str, ...]
    treatment_positive: str | None = None
    treatment_negative: str | None = None
    sensitive_positive: str | None = None
    sensitive_negative: str | None = None

    def __post_init__(self):
        if not self.covariates:
            raise SchemaError("schema needs at least one covariate column")
        names = [self.outcome, self.treatment, self.sensitive, *self.covariates]
        dupes = sorted({c for c in names if names.count(c) > 1})
        if dupes:
            raise SchemaError(f"schema assigns multiple roles to column(s): {dupes}")

    @classmethod
    def from_dict(cls, spec: Mapping) -> "ColumnSchema":
        try:
            return cls(
                outcome=spec["outcome"],
                treatment=spec["treatment"],
                sensitive=spec["sensitive"],
                covariates=tuple(spec["covariates"]),
                treatment_positive=spec.get("treatment_positive"),
                treatment_negative=spec.get("treatment_negative"),
                sensitive_positive=spec.get("sensitive_positive"),
                sensitive_negative=spec.get("sensitive_negative"),
            )
        except KeyError as err:
            raise SchemaError(f"schema is missing required key: {err.args[0]!r}") from None


@dataclass(frozen=True)
class Observation:
    """One record: outcome, treatment arm, sensitive group, covariates."""

    y: float
    a: int
    s: int
    x: tuple[float, ...]


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ObservationalDataset:
    """Immutable sample of n records plus optional fold labels in {1..K}."""

    y: np.ndarray
    a: np.ndarray
    s: np.ndarray
    x: np.ndarray
    covariate_names: tuple[str, ...]
    fold: np.ndarray | None = None

    def __post_init__(self):
        y = _frozen_array(self.y, float)
        a = _frozen_array(self.a, int)
        s = _frozen_array(self.s, int)
        x = _frozen_array(self.x, float)
        if x.ndim != 2:
            raise DataValidationError("covariate matrix must be 2-dimensional")
        n = y.shape[0]
        if not (a.shape == (n,) and s.shape == (n,) and x.shape[0] == n):
            raise DataValidationError("y, a, s, x must share the same length")
        if len(self.covariate_names) != x.shape[1]:
            raise DataValidationError("covariate_names must match the covariate count")
        if not np.all(np.isfinite(y)):
            raise DataValidationError("outcome contains non-finite values")
        if not np.all(np.isfinite(x)):
            raise DataValidationError("covariates contain non-finite values")
        if not np.isin(a, (0, 1)).all():
            raise DataValidationError("treatment must be binary 0/1")
        if not np.isin(s, (0, 1)).all():
            raise DataValidationError("sensitive feature must be binary 0/1")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        if self.fold is not None:
            fold = _frozen_array(self.fold, int)
            if fold.shape != (n,):
                raise DataValidationError("fold labels must match the record count")
            k = int(fold.max(initial=0))
            if fold.min(initial=1) < 1:
                raise DataValidationError("fold labels must lie in {1..K}")
            sizes = np.bincount(fold, minlength=k + 1)[1:]
            if (sizes == 0).any():
                raise DataValidationError("every fold in {1..K} must be nonempty")
            if sizes.max() - sizes.min() > 1:
                raise DataValidationError("fold sizes may differ by at most 1")
            if n < 2 * k:
                raise DataValidationError("need at least 2 records per fold")
            object.__setattr__(self, "fold", fold)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def n_folds(self) -> int:
        if self.fold is None:
            raise ParameterError("folds have not been assigned")
        return int(self.fold.max())

    def record(self, i: int) -> Observation:
        return Observation(float(self.y[i]), int(self.a[i]), int(self.s[i]),
                           tuple(float(v) for v in self.x[i]))

    def with_folds(self, fold: np.ndarray) -> "ObservationalDataset":
        return replace(self, fold=fold)

    def take(self, indices: np.ndarray) -> "ObservationalDataset":
        """Row subset / reordering. Fold labels are dropped: a subset is a new
        sample and needs its own split."""
        idx = np.asarray(indices)
        return ObservationalDataset(
            y=self.y[idx], a=self.a[idx], s=self.s[idx], x=self.x[idx],
            covariate_names=self.covariate_names, fold=None,
        )


def _parse_binary_column(raw: list[str], positive: str | None,
                         negative: str | None, column: str,
                         lines: list[int], problems: list[str]) -> np.ndarray:
    out = np.zeros(len(raw), dtype=int)
    if positive is not None:
        observed_negative = negative
        for i, value in enumerate(raw):
            if value == positive:
                out[i] = 1
            elif observed_negative is None:
                observed_negative = value
            elif value != observed_negative:
                problems.append(
                    f"line {lines[i]}: column {column!r} has value {value!r}, "
                    f"expected {positive!r} or {observed_negative!r}")
        return out
    for i, value in enumerate(raw):
        try:
            num = float(value)
        except ValueError:
            problems.append(f"line {lines[i]}: column {column!r} is not numeric: {value!r}")
            continue
        if num == 0.0:
            out[i] = 0
        elif num == 1.0:
            out[i] = 1
        else:
            problems.append(f"line {lines[i]}: column {column!r} must be 0/1, got {value!r}")
    return out


def load_csv(path: str | Path, schema: ColumnSchema) -> ObservationalDataset:
    """Parse an RFC-4180 CSV (header required, UTF-8) into a dataset.

    Rows violating the data model (missing fields, non-numeric outcome or
    covariates, non-binary treatment/sensitive values) are reported with
    their file line numbers. Fold labels are left unassigned.
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        wanted = [schema.outcome, schema.treatment, schema.sensitive, *schema.covariates]
        missing = [c for c in wanted if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}; header has {header}")
        col = {name: header.index(name) for name in wanted}
        rows, lines = [], []
        problems: list[str] = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                problems.append(f"line {line_no}: expected {len(header)} fields, got {len(row)}")
                continue
            if any(row[col[name]] == "" for name in wanted):
                empty = [name for name in wanted if row[col[name]] == ""]
                problems.append(f"line {line_no}: missing value in column(s) {empty}")
                continue
            rows.append(row)
            lines.append(line_no)

    n = len(rows)
    y = np.zeros(n)
    x = np.zeros((n, len(schema.covariates)))
    for i, row in enumerate(rows):
        for target, names in ((y, [schema.outcome]), (x, schema.covariates)):
            for j, name in enumerate(names):
                value = row[col[name]]
                try:
                    num = float(value)
                except ValueError:
                    problems.append(f"line {lines[i]}: column {name!r} is not numeric: {value!r}")
                    continue
                if not np.isfinite(num):
                    problems.append(f"line {lines[i]}: column {name!r} is not finite: {value!r}")
                    continue
                if target is y:
                    y[i] = num
                else:
                    x[i, j] = num

    a = _parse_binary_column([r[col[schema.treatment]] for r in rows],
                             schema.treatment_positive, schema.treatment_negative,
                             schema.treatment, lines, problems)
    s = _parse_binary_column([r[col[schema.sensitive]] for r in rows],
                             schema.sensitive_positive, schema.sensitive_negative,
                             schema.sensitive, lines, problems)
    if problems:
        shown = problems[:_MAX_REPORTED_ROWS]
        more = len(problems) - len(shown)
        suffix = f"\n... and {more} more" if more > 0 else ""
        raise DataValidationError(
            f"{path}: {len(problems)} invalid row(s):\n" + "\n".join(shown) + suffix)
    return ObservationalDataset(y=y, a=a, s=s, x=x,
                                covariate_names=tuple(schema.covariates))


def dump_csv(data: ObservationalDataset, path: str | Path,
             extra_columns: Mapping[str, np.ndarray] | None = None) -> None:
    """Write a dataset back to CSV. Floats use repr so finite values
    round-trip bit-exactly through load_csv."""
    path = Path(path)
    extra = dict(extra_columns or {})
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", "a", "s", *data.covariate_names, *extra])
        for i in range(data.n):
            row = [repr(float(data.y[i])), str(int(data.a[i])), str(int(data.s[i]))]
            row += [repr(float(v)) for v in data.x[i]]
            row += [repr(float(extra[name][i])) for name in extra]
            writer.writerow(row)


def assign_folds(data: ObservationalDataset, k: int, seed: int) -> ObservationalDataset:
    """Partition records into k near-equal folds by a seeded random permutation.

    Fold sizes differ by at most one; the same seed always yields the same
    assignment.
    """
    if not 2 <= k <= data.n // 2:
        raise ParameterError(f"fold count must satisfy 2 <= k <= n/2, got k={k}, n={data.n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n)
    fold = np.zeros(data.n, dtype=int)
    base, leftover = divmod(data.n, k)
    start = 0
    for b in range(1, k + 1):
        size = base + (1 if b <= leftover else 0)
        fold[perm[start:start + size]] = b
        start += size
    return data.with_folds(fold)
