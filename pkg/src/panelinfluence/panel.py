"""Long-format panel container, CSV ingestion and the within-group transform."""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

logger = logging.getLogger(__name__)

_MISSING = {"", "na", "nan", "null", "none", "."}


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _coerce_ids(values: Sequence[str]) -> list:
    """Use integer ids when every label parses as an integer, strings otherwise."""
    try:
        return [int(v) for v in values]
    except ValueError:
        return [str(v) for v in values]


@dataclass(frozen=True)
class PanelSchema:
    """Column mapping for a long-format CSV."""

    unit: str
    time: str
    y: str
    x: tuple[str, ...]

    def __post_init__(self):
        if isinstance(self.x, str):
            object.__setattr__(self, "x", (self.x,))
        else:
            object.__setattr__(self, "x", tuple(self.x))
        if not self.x:
            raise ValidationError("schema needs at least one regressor column")
        names = [self.unit, self.time, self.y, *self.x]
        if len(set(names)) != len(names):
            raise ValidationError(f"schema columns must be distinct, got {names}")


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Panel sorted by (unit, time), stored as stacked observation arrays.

    Observations of unit ``i`` occupy ``slice(offsets[i], offsets[i + 1])``
    in ``y`` and ``X``. The regressor matrix carries no intercept column.
    """

    unit_ids: tuple
    times: tuple[tuple, ...]
    y: np.ndarray
    X: np.ndarray
    y_name: str = "y"
    x_names: tuple[str, ...] = ()
    offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValidationError(f"X has shape {X.shape}, expected ({y.shape[0]}, k)")
        if X.shape[1] < 1:
            raise ValidationError("at least one regressor is required")
        units = tuple(self.unit_ids)
        times = tuple(tuple(t) for t in self.times)
        if len(units) != len(times):
            raise ValidationError("one time list per unit is required")
        if len(units) < 2:
            raise ValidationError(f"a panel needs at least 2 units, got {len(units)}")
        if len(set(units)) != len(units):
            raise ValidationError("unit identifiers must be unique")
        counts = np.array([len(t) for t in times], dtype=np.int64)
        if counts.sum() != y.shape[0]:
            raise ValidationError("time lists do not match the number of observations")
        for u, ts in zip(units, times):
            if len(ts) < 2:
                raise ValidationError(f"unit {u} has {len(ts)} period(s); at least 2 are required")
            if any(not (a < b) for a, b in zip(ts, ts[1:])):
                raise ValidationError(f"times of unit {u} must be strictly increasing")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise ValidationError("y and X must not contain missing or non-finite values")
        x_names = tuple(self.x_names) or tuple(f"x{c + 1}" for c in range(X.shape[1]))
        if len(x_names) != X.shape[1]:
            raise ValidationError("one name per regressor column is required")
        object.__setattr__(self, "unit_ids", units)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "x_names", x_names)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        offsets.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)

    @classmethod
    def from_long(cls, unit, time, y, X, *, y_name="y", x_names=()) -> "PanelDataset":
        """Build from unsorted long-format columns (one entry per observation)."""
        unit = list(unit)
        time = list(time)
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if not (len(unit) == len(time) == y.shape[0] == X.shape[0]):
            raise ValidationError("unit, time, y and X must have the same length")
        seen: dict[tuple, int] = {}
        for r, key in enumerate(zip(unit, time)):
            if key in seen:
                raise ValidationError(
                    f"duplicate observation for unit {key[0]}, time {key[1]} "
                    f"(first seen at position {seen[key]})",
                    row=r,
                )
            seen[key] = r
        order = sorted(range(len(unit)), key=lambda r: (unit[r], time[r]))
        ids: list = []
        times: list[list] = []
        for r in order:
            if not ids or ids[-1] != unit[r]:
                ids.append(unit[r])
                times.append([])
            times[-1].append(time[r])
        idx = np.asarray(order, dtype=np.int64)
        return cls(tuple(ids), tuple(map(tuple, times)), y[idx], X[idx],
                   y_name=y_name, x_names=tuple(x_names))

    @property
    def n_units(self) -> int:
        return len(self.unit_ids)

    @property
    def n_obs(self) -> int:
        return int(self.y.shape[0])

    @property
    def k(self) -> int:
        return int(self.X.shape[1])

    @property
    def periods(self) -> np.ndarray:
        return np.diff(self.offsets)

    def block(self, i: int) -> slice:
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def unit_index(self, unit_id) -> int:
        try:
            return self.unit_ids.index(unit_id)
        except ValueError:
            raise ValidationError(f"unknown unit {unit_id!r}") from None

    def long_columns(self) -> tuple[list, list]:
        """Unit and time label per stacked observation."""
        units = [u for u, ts in zip(self.unit_ids, self.times) for _ in ts]
        times = [t for ts in self.times for t in ts]
        return units, times

    def without(self, excluded: Iterable) -> "PanelDataset":
        """Copy with the full history of the given units (by position) removed."""
        drop = set(excluded)
        keep = [i for i in range(self.n_units) if i not in drop]
        rows = np.concatenate([np.arange(*self.block(i).indices(self.n_obs)) for i in keep])
        return PanelDataset(
            tuple(self.unit_ids[i] for i in keep),
            tuple(self.times[i] for i in keep),
            self.y[rows], self.X[rows], y_name=self.y_name, x_names=self.x_names,
        )

    def equals(self, other: "PanelDataset") -> bool:
        return (
            self.unit_ids == other.unit_ids
            and self.times == other.times
            and self.y_name == other.y_name
            and self.x_names == other.x_names
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.X, other.X)
        )

    def to_csv(self, path: str | os.PathLike, unit_col: str = "unit", time_col: str = "time") -> None:
        """Write in long format; floats use ``repr`` so reloading is exact."""
        units, times = self.long_columns()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([unit_col, time_col, self.y_name, *self.x_names])
            for r in range(self.n_obs):
                w.writerow([units[r], times[r], repr(float(self.y[r])),
                            *(repr(float(v)) for v in self.X[r])])


def load_csv(path: str | os.PathLike, schema: PanelSchema) -> PanelDataset:
    """Read a long-format panel CSV (UTF-8, header row, ``.`` decimals).

    Reported row numbers are file line numbers, the header being line 1.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError("empty file: a header row is required") from None
        wanted = [schema.unit, schema.time, schema.y, *schema.x]
        missing = [c for c in wanted if c not in header]
        if missing:
            raise ValidationError(f"columns not found in header: {', '.join(missing)}", row=1)
        cols = [header.index(c) for c in wanted]

        unit_raw: list[str] = []
        time_raw: list[str] = []
        values: list[list[float]] = []
        lines: list[int] = []
        for line, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) < len(header):
                raise ValidationError(f"expected {len(header)} fields, found {len(rec)}", row=line)
            cells = [rec[c].strip() for c in cols]
            for name, cell in zip(wanted, cells):
                if cell.lower() in _MISSING:
                    raise ValidationError(f"missing value in column {name!r}", row=line)
            nums = []
            for name, cell in zip(wanted[2:], cells[2:]):
                try:
                    v = float(cell)
                except ValueError:
                    raise ValidationError(f"non-numeric value {cell!r} in column {name!r}", row=line) from None
                if not math.isfinite(v):
                    raise ValidationError(f"non-finite value {cell!r} in column {name!r}", row=line)
                nums.append(v)
            unit_raw.append(cells[0])
            time_raw.append(cells[1])
            values.append(nums)
            lines.append(line)

    if not values:
        raise ValidationError("file contains no observations")
    units = _coerce_ids(unit_raw)
    times = _coerce_ids(time_raw)

    first: dict[tuple, int] = {}
    for key, line in zip(zip(units, times), lines):
        if key in first:
            raise ValidationError(
                f"duplicate observation for unit {key[0]}, time {key[1]} (also on line {first[key]})",
                row=line,
            )
        first[key] = line
    per_unit: dict = {}
    for u, line in zip(units, lines):
        per_unit.setdefault(u, []).append(line)
    for u, ls in per_unit.items():
        if len(ls) < 2:
            raise ValidationError(f"unit {u} has a single period; at least 2 are required", row=ls[0])

    arr = np.asarray(values, dtype=np.float64)
    return PanelDataset.from_long(units, times, arr[:, 0], arr[:, 1:],
                                  y_name=schema.y, x_names=schema.x)


@dataclass(frozen=True, eq=False)
class DemeanedPanel:
    """Per-unit time-demeaned response and regressors, same layout as the source."""

    y_tilde: np.ndarray
    X_tilde: np.ndarray
    offsets: np.ndarray
    unit_ids: tuple
    times: tuple[tuple, ...]

    @property
    def n_units(self) -> int:
        return len(self.unit_ids)

    @property
    def k(self) -> int:
        return int(self.X_tilde.shape[1])

    @property
    def periods(self) -> np.ndarray:
        return np.diff(self.offsets)

    def block(self, i: int) -> slice:
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def unit_index(self, unit_id) -> int:
        return self.unit_ids.index(unit_id)

    def xtx_block(self, i: int) -> np.ndarray:
        Xi = self.X_tilde[self.block(i)]
        return Xi.T @ Xi


def _demean(values: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    counts = np.diff(offsets)
    means = np.add.reduceat(values, offsets[:-1], axis=0) / counts.reshape((-1,) + (1,) * (values.ndim - 1))
    return values - np.repeat(means, counts, axis=0)


def within_group_transform(data: PanelDataset) -> DemeanedPanel:
    """Subtract each unit's own time mean from y and from every regressor."""
    periods = data.periods
    if np.any(periods <= data.k):
        thin = [u for u, p in zip(data.unit_ids, periods) if p <= data.k]
        logger.debug("units with T_i <= k may give degenerate leverage blocks: %s", thin[:10])
    return DemeanedPanel(
        y_tilde=_readonly(_demean(data.y, data.offsets)),
        X_tilde=_readonly(_demean(data.X, data.offsets)),
        offsets=data.offsets,
        unit_ids=data.unit_ids,
        times=data.times,
    )
