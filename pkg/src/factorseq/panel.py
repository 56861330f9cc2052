"""Panel data model, CSV ingestion, stationarity transforms and sample moments.

A :class:`Panel` stores an ``n x T`` matrix (rows are cross-sectional
units, columns are time points). CSV files use the transposed, FRED-MD-like
layout: one row per date, one column per series, and an optional second
header row holding transform codes.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError

MISSING_TOKENS = {"", "na", "nan", "n/a", "null", "."}

_ISO_DATE = re.compile(r"^(\d{4})-(\d{1,2})(?:-(\d{1,2}))?$")
_YEAR_MONTH = re.compile(r"^(\d{4}):(\d{1,2})$")
_US_DATE = re.compile(r"^(\d{1,2})/(\d{1,2})/(\d{4})$")  # FRED-MD style M/D/YYYY


@dataclass(frozen=True)
class Panel:
    """Observed double sequence ``y_it`` for ``i < n`` and ``t < T``.

    Parameters
    ----------
    values : array_like, shape (n, T)
    labels : sequence of str
        Unique series names, one per row.
    t0 : int
        Integer time offset of the first column.
    index : sequence of str, optional
        Original time-index strings (one per column), kept for writing.
    tcodes : sequence of int, optional
        Transform codes attached by :func:`load_panel_csv`.
    shift, scale : ndarray, optional
        Row means and standard deviations removed by :func:`standardize`.
    """

    values: np.ndarray
    labels: tuple
    t0: int = 0
    index: Optional[tuple] = None
    tcodes: Optional[tuple] = None
    shift: Optional[np.ndarray] = field(default=None, repr=False)
    scale: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            raise DataError(f"panel values must be 2-d, got shape {values.shape}")
        n, T = values.shape
        if n < 1 or T < 2:
            raise DataError(f"panel needs n >= 1 and T >= 2, got n={n}, T={T}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[:5]
            raise DataError(f"panel contains non-finite entries at (row, col) {bad.tolist()}")
        labels = tuple(str(s) for s in self.labels)
        if len(labels) != n:
            raise DataError(f"{len(labels)} labels for {n} rows")
        if len(set(labels)) != n:
            raise DataError("series labels must be unique")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "t0", int(self.t0))
        if self.index is not None:
            index = tuple(str(s) for s in self.index)
            if len(index) != T:
                raise DataError(f"time index has {len(index)} entries for T={T}")
            object.__setattr__(self, "index", index)
        if self.tcodes is not None:
            tcodes = tuple(int(c) for c in self.tcodes)
            if len(tcodes) != n:
                raise DataError(f"{len(tcodes)} transform codes for {n} series")
            object.__setattr__(self, "tcodes", tcodes)
        for name in ("shift", "scale"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr, dtype=float).reshape(n)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_array(cls, values, labels=None, t0=0) -> "Panel":
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[None, :]
        if labels is None:
            labels = [f"y{i + 1}" for i in range(values.shape[0])]
        return cls(values, tuple(labels), t0)

    def with_values(self, values, t0=None) -> "Panel":
        """Same series labels and transform metadata, new values.

        The time index is kept only when the number of columns is unchanged
        and the origin did not move.
        """
        values = np.asarray(values, dtype=float)
        new_t0 = self.t0 if t0 is None else t0
        index = self.index
        if index is not None and (values.shape[1] != self.T or new_t0 != self.t0):
            start = new_t0 - self.t0
            index = index[start:start + values.shape[1]] if start >= 0 else None
            if index is not None and len(index) != values.shape[1]:
                index = None
        return Panel(values, self.labels, new_t0, index, self.tcodes, self.shift, self.scale)

    def columns(self, start: int, stop: int) -> "Panel":
        """Sub-panel of columns ``start:stop`` (array positions)."""
        return self.with_values(self.values[:, start:stop], t0=self.t0 + start)

    def inverse_transform(self, values=None, include_shift=True) -> np.ndarray:
        """Map standardized values back to the original units.

        With ``include_shift=False`` only the scale is restored; use that
        for zero-mean components such as an estimated common component.
        """
        values = self.values if values is None else np.asarray(values, dtype=float)
        if self.scale is None:
            return np.array(values, dtype=float)
        out = values * self.scale[:, None]
        if include_shift:
            out = out + self.shift[:, None]
        return out


@dataclass(frozen=True)
class CovMatrix:
    """Sample autocovariance at one lag."""

    lag: int
    values: np.ndarray


def _parse_time_key(token: str, row: int):
    tok = token.strip()
    m = _ISO_DATE.match(tok)
    if m:
        y, mo, d = int(m.group(1)), int(m.group(2)), int(m.group(3) or 1)
        return (y, mo, d)
    m = _YEAR_MONTH.match(tok)
    if m:
        return (int(m.group(1)), int(m.group(2)), 1)
    m = _US_DATE.match(tok)
    if m:
        return (int(m.group(3)), int(m.group(1)), int(m.group(2)))
    try:
        return (int(tok), 0, 0)
    except ValueError:
        raise DataError(
            f"row {row}: time index {token!r} is not an ISO date, YYYY:MM, M/D/YYYY or integer"
        ) from None


def load_panel_csv(path, has_tcode_row: bool = False) -> Panel:
    """Read a panel from CSV (dates in rows, series in columns).

    Parameters
    ----------
    path : path-like
    has_tcode_row : bool
        If true, the row after the header holds integer transform codes
        1-7, one per series; its first cell is ignored.

    Raises
    ------
    DataError
        Non-numeric cells, ragged rows, missing values (all locations are
        listed), invalid transform codes or an unparseable time index.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    if len(rows) < 2:
        raise DataError(f"{path}: need a header and at least one data row")
    header = [c.strip() for c in rows[0]]
    labels = header[1:]
    if not labels:
        raise DataError(f"{path}: header has no series columns")
    width = len(header)
    body_start = 1
    tcodes = None
    if has_tcode_row:
        trow = rows[1]
        if len(trow) != width:
            raise DataError(f"{path}: transform-code row has {len(trow)} cells, header has {width}")
        tcodes = []
        for j, cell in enumerate(trow[1:], start=1):
            try:
                code = float(cell)
            except ValueError:
                raise DataError(f"{path}: transform code {cell!r} in column {j + 1} is not a number") from None
            if code != int(code) or not 1 <= int(code) <= 7:
                raise DataError(f"{path}: transform code {cell!r} in column {j + 1} outside 1..7")
            tcodes.append(int(code))
        body_start = 2
    body = rows[body_start:]
    if len(body) < 2:
        raise DataError(f"{path}: need at least two dated rows")
    index, keys = [], []
    data = np.empty((len(body), len(labels)))
    missing = []
    for r, row in enumerate(body):
        line = r + body_start + 1
        if len(row) != width:
            raise DataError(f"{path}: line {line} has {len(row)} cells, expected {width}")
        index.append(row[0].strip())
        keys.append(_parse_time_key(row[0], line))
        for j, cell in enumerate(row[1:]):
            tok = cell.strip()
            if tok.lower() in MISSING_TOKENS:
                missing.append((labels[j], row[0].strip()))
                data[r, j] = np.nan
                continue
            try:
                data[r, j] = float(tok)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell {cell!r} at line {line}, column {j + 2} ({labels[j]})"
                ) from None
            if not math.isfinite(data[r, j]):
                missing.append((labels[j], row[0].strip()))
    if missing:
        shown = ", ".join(f"{s}@{d}" for s, d in missing[:20])
        more = f" (+{len(missing) - 20} more)" if len(missing) > 20 else ""
        raise DataError(f"{path}: {len(missing)} missing values: {shown}{more}")
    order = sorted(range(len(body)), key=lambda k: keys[k])
    if len(set(keys)) != len(keys):
        raise DataError(f"{path}: duplicate time index entries")
    data = data[order]
    index = [index[k] for k in order]
    # integer time keys are positions, so the first one fixes t0
    t0 = keys[order[0]][0] if all(k[1:] == (0, 0) for k in keys) else 0
    return Panel(data.T, tuple(labels), t0, tuple(index), tcodes)


def write_panel_csv(p: Panel, path, include_tcodes: bool = True, index_name: str = "date") -> None:
    """Write ``p`` in the layout read by :func:`load_panel_csv`."""
    path = Path(path)
    index = p.index if p.index is not None else tuple(str(p.t0 + t) for t in range(p.T))
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([index_name, *p.labels])
        if include_tcodes and p.tcodes is not None:
            w.writerow(["transform", *p.tcodes])
        for t in range(p.T):
            w.writerow([index[t], *(repr(float(v)) for v in p.values[:, t])])


_TCODE_LOSS = {1: 0, 2: 1, 3: 2, 4: 0, 5: 1, 6: 2, 7: 2}


def apply_tcode(series, code: int) -> np.ndarray:
    """Apply a FRED-MD stationarity transform.

    ====  ===============================
    code  transform
    ====  ===============================
    1     x
    2     diff(x)
    3     diff(x, 2)
    4     log(x)
    5     diff(log(x))
    6     diff(log(x), 2)
    7     diff(x[t] / x[t-1] - 1)
    ====  ===============================
    """
    x = np.asarray(series, dtype=float)
    if code not in _TCODE_LOSS:
        raise DataError(f"transform code {code!r} outside 1..7")
    if x.ndim != 1 or x.size <= _TCODE_LOSS[code]:
        raise DataError(f"series of length {x.size} too short for transform code {code}")
    if code in (4, 5, 6):
        if np.any(x <= 0):
            bad = int(np.argmax(x <= 0))
            raise DataError(f"transform code {code} needs positive values; x[{bad}] = {x[bad]}")
        x = np.log(x)
    if code == 1 or code == 4:
        return x.copy()
    if code in (2, 5):
        return np.diff(x)
    if code in (3, 6):
        return np.diff(x, 2)
    if np.any(x[:-1] == 0):
        raise DataError("transform code 7 divides by a zero value")
    return np.diff(x[1:] / x[:-1] - 1.0)


def apply_tcodes(p: Panel, codes: Optional[Sequence[int]] = None) -> Panel:
    """Transform every series and trim the panel to a common balanced window."""
    codes = p.tcodes if codes is None else tuple(int(c) for c in codes)
    if codes is None:
        raise DataError("panel has no transform codes")
    if len(codes) != p.n:
        raise DataError(f"{len(codes)} transform codes for {p.n} series")
    drop = max(_TCODE_LOSS.get(c, 0) for c in codes)
    out = np.empty((p.n, p.T - drop))
    for i, c in enumerate(codes):
        try:
            z = apply_tcode(p.values[i], c)
        except DataError as exc:
            raise DataError(f"series {p.labels[i]}: {exc}") from None
        out[i] = z[len(z) - (p.T - drop):]
    index = p.index[drop:] if p.index is not None else None
    return Panel(out, p.labels, p.t0 + drop, index, codes)


def standardize(p: Panel) -> Panel:
    """Demean and scale every row to unit variance (divisor ``T``).

    The removed means and standard deviations are stored on the result
    (composed with any standardization already recorded on ``p``), so
    :meth:`Panel.inverse_transform` always returns to the raw units.
    """
    mean = p.values.mean(axis=1)
    var = p.values.var(axis=1)
    bad = np.flatnonzero(var <= 1e-12)
    if bad.size:
        raise DataError(f"degenerate (constant) series: {[p.labels[i] for i in bad]}")
    sd = np.sqrt(var)
    z = (p.values - mean[:, None]) / sd[:, None]
    if p.scale is not None:
        shift = p.shift + p.scale * mean
        scale = p.scale * sd
    else:
        shift, scale = mean, sd
    return replace(p, values=z, shift=shift, scale=scale)


def sample_autocov(p, k: int) -> CovMatrix:
    """Sample autocovariance ``T^-1 sum_t y_t y_{t-k}'`` with divisor ``T``.

    The data are taken as zero-mean (standardize first). Negative lags
    return the exact transpose of the positive lag.
    """
    y = p.values if isinstance(p, Panel) else np.asarray(p, dtype=float)
    T = y.shape[1]
    k = int(k)
    if abs(k) >= T:
        raise DataError(f"lag {k} must satisfy |k| < T = {T}")
    m = abs(k)
    g = y[:, m:] @ y[:, :T - m].T / T
    return CovMatrix(k, g.T.copy() if k < 0 else g)
