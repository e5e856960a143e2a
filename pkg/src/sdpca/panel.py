"""Time-series panel container, stationarity transforms, and FRED-MD style CSV I/O.

A panel holds a T x N block of predictor observations (rows = time,
columns = series) together with date labels, series names, optional
group labels, and optional integer transformation codes in 1..7.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    EmptyPanel,
    InvalidConfig,
    LengthMismatch,
    MalformedHeader,
    NonFiniteInput,
    NonIntegerTcode,
    NonPositiveForLog,
    UnknownCode,
    ZeroVarianceColumn,
)

__all__ = [
    "Panel",
    "TargetSeries",
    "StandardizationStats",
    "LEADS_LOST",
    "apply_tcode",
    "apply_transforms",
    "ingest_fredmd",
    "write_fredmd",
    "write_drop_report",
    "standardize",
    "standardize_values",
]

# Leading observations consumed by each transformation code.
LEADS_LOST = {1: 0, 2: 1, 3: 2, 4: 0, 5: 1, 6: 2, 7: 2}

_MISSING_TOKENS = {"", "na", "nan", "n/a", "null", "."}


@dataclass
class Panel:
    """T x N observed predictor block with per-column metadata.

    Parameters
    ----------
    values : ndarray, shape (T, N)
        Observations, rows ordered in time.
    dates : list of str
        Length-T opaque, ordered date labels.
    names : list of str
        Length-N unique series identifiers.
    groups : list of str, optional
        Length-N category labels (e.g. FRED-MD group codes).
    tcodes : list of int, optional
        Length-N transformation codes in 1..7.
    """

    values: np.ndarray
    dates: list[str]
    names: list[str]
    groups: list[str] | None = None
    tcodes: list[int] | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise InvalidConfig("panel values must be a 2-D array")
        t, n = self.values.shape
        if t < 2:
            raise InvalidConfig(f"panel needs at least 2 rows, got {t}")
        if len(self.dates) != t:
            raise LengthMismatch(f"{len(self.dates)} dates for {t} rows")
        if len(self.names) != n:
            raise LengthMismatch(f"{len(self.names)} names for {n} columns")
        if len(set(self.names)) != n:
            dupes = sorted({x for x in self.names if self.names.count(x) > 1})
            raise InvalidConfig(f"duplicate series names: {dupes}")
        if self.groups is not None and len(self.groups) != n:
            raise LengthMismatch("groups length does not match column count")
        if self.tcodes is not None:
            if len(self.tcodes) != n:
                raise LengthMismatch("tcodes length does not match column count")
            bad = [c for c in self.tcodes if c not in LEADS_LOST]
            if bad:
                raise UnknownCode(f"tcodes outside 1..7: {sorted(set(bad))}")

    @property
    def n_periods(self) -> int:
        return self.values.shape[0]

    @property
    def n_series(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def select(self, idx: list[int]) -> "Panel":
        """New panel keeping the given column indices, in order."""
        return Panel(
            values=self.values[:, idx],
            dates=list(self.dates),
            names=[self.names[i] for i in idx],
            groups=None if self.groups is None else [self.groups[i] for i in idx],
            tcodes=None if self.tcodes is None else [self.tcodes[i] for i in idx],
        )


@dataclass
class TargetSeries:
    """Forecast target: a length-T series plus the horizon it is predicted at."""

    values: np.ndarray
    horizon: int = 1
    name: str = "y"

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float).ravel()
        if not np.isfinite(self.values).all():
            raise NonFiniteInput(f"target '{self.name}' contains non-finite values")
        if int(self.horizon) < 1:
            raise InvalidConfig(f"horizon must be >= 1, got {self.horizon}")
        self.horizon = int(self.horizon)


@dataclass
class StandardizationStats:
    """Column means/stddevs from a fitting window, reusable on later rows.

    ``degenerate`` flags zero-variance columns; those are centered and
    zeroed rather than divided, so they carry no weight downstream.
    """

    means: np.ndarray
    stddevs: np.ndarray
    fitted_on: str = ""
    degenerate: list[int] = field(default_factory=list)


def apply_tcode(series, code: int) -> np.ndarray:
    """Apply one FRED-MD transformation code to a single series.

    Codes: (1) level, (2) first difference, (3) second difference,
    (4) log, (5) log difference, (6) second log difference,
    (7) difference of the period-over-period growth rate.
    The output is shorter than the input by 0, 1, or 2 observations
    depending on the differencing depth.
    """
    x = np.asarray(series, dtype=float).ravel()
    if code not in LEADS_LOST:
        raise UnknownCode(f"transformation code must be in 1..7, got {code!r}")
    if not np.isfinite(x).all():
        raise NonFiniteInput("series contains non-finite values")
    if code in (4, 5, 6) and np.any(x <= 0.0):
        raise NonPositiveForLog(
            f"code {code} requires strictly positive values; min={x.min():g}"
        )
    if code == 1:
        out = x.copy()
    elif code == 2:
        out = np.diff(x)
    elif code == 3:
        out = np.diff(x, n=2)
    elif code == 4:
        out = np.log(x)
    elif code == 5:
        out = np.diff(np.log(x))
    elif code == 6:
        out = np.diff(np.log(x), n=2)
    else:  # code 7
        with np.errstate(divide="ignore", invalid="ignore"):
            growth = x[1:] / x[:-1] - 1.0
        out = np.diff(growth)
        if not np.isfinite(out).all():
            raise NonFiniteInput("code 7 hit a zero denominator")
    return out


def apply_transforms(panel: Panel) -> Panel:
    """Transform every column by its tcode and re-align the panel.

    Rows consumed by differencing are dropped from the front of all
    columns (the maximum depth across columns governs) so the result
    stays rectangular and time-aligned.
    """
    if panel.tcodes is None:
        raise InvalidConfig("panel has no tcodes to apply")
    depth = max(LEADS_LOST[c] for c in panel.tcodes)
    t_out = panel.n_periods - depth
    if t_out < 2:
        raise EmptyPanel("differencing leaves fewer than 2 rows")
    out = np.empty((t_out, panel.n_series))
    for j, code in enumerate(panel.tcodes):
        col = apply_tcode(panel.values[:, j], code)
        out[:, j] = col[len(col) - t_out :]
    return Panel(
        values=out,
        dates=list(panel.dates[depth:]),
        names=list(panel.names),
        groups=None if panel.groups is None else list(panel.groups),
        tcodes=list(panel.tcodes),
    )


def _parse_cell(token: str) -> float:
    tok = token.strip()
    if tok.lower() in _MISSING_TOKENS:
        return math.nan
    try:
        return float(tok)
    except ValueError:
        return math.nan


def ingest_fredmd(path) -> tuple[Panel, list[dict]]:
    """Read a FRED-MD style CSV: name row, transform row, date column.

    Columns with any missing cell are dropped whole (never imputed) and
    reported. Returns the panel and the drop report, one record per
    removed column.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    if len(rows) < 3:
        raise MalformedHeader("need a name row, a transform row, and data rows")
    header, trow = rows[0], rows[1]
    if len(header) < 2:
        raise MalformedHeader("header row has no series columns")
    names = [c.strip() for c in header[1:]]
    if any(not n for n in names):
        raise MalformedHeader("blank series name in header row")
    if len(trow) != len(header):
        raise MalformedHeader(
            f"transform row has {len(trow)} cells, header has {len(header)}"
        )
    tcodes = []
    for tok in trow[1:]:
        try:
            val = float(tok.strip())
        except ValueError:
            raise NonIntegerTcode(f"transform entry {tok!r} is not a number") from None
        if val != int(val):
            raise NonIntegerTcode(f"transform entry {tok!r} is not an integer")
        tcodes.append(int(val))

    dates = []
    data = []
    for r in rows[2:]:
        if len(r) != len(header):
            raise MalformedHeader(
                f"data row for {r[0]!r} has {len(r)} cells, expected {len(header)}"
            )
        dates.append(r[0].strip())
        data.append([_parse_cell(c) for c in r[1:]])
    values = np.asarray(data, dtype=float)
    if values.shape[0] < 2:
        raise EmptyPanel("fewer than 2 data rows")

    missing = np.isnan(values)
    keep, report = [], []
    for j, name in enumerate(names):
        n_miss = int(missing[:, j].sum())
        if n_miss:
            report.append(
                {"name": name, "reason": "missing_values", "n_missing": n_miss}
            )
        else:
            keep.append(j)
    if not keep:
        raise EmptyPanel("every column has missing values")
    panel = Panel(
        values=values[:, keep],
        dates=dates,
        names=[names[j] for j in keep],
        tcodes=[tcodes[j] for j in keep],
    )
    return panel, report


def write_fredmd(panel: Panel, path) -> None:
    """Serialize a panel back to the FRED-MD CSV layout."""
    if panel.tcodes is None:
        raise InvalidConfig("panel has no tcodes; cannot write transform row")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sasdate"] + list(panel.names))
        w.writerow(["Transform:"] + [str(c) for c in panel.tcodes])
        for i, d in enumerate(panel.dates):
            w.writerow([d] + [repr(v) for v in panel.values[i]])


def write_drop_report(report: list[dict], path) -> None:
    """Write the column-drop report as JSON lines."""
    with open(path, "w") as fh:
        for rec in report:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def standardize_values(
    values: np.ndarray, stats: StandardizationStats | None = None
) -> tuple[np.ndarray, StandardizationStats]:
    """Column-wise z-scoring of a raw matrix; see :func:`standardize`."""
    x = np.asarray(values, dtype=float)
    if stats is None:
        means = x.mean(axis=0)
        stds = x.std(axis=0, ddof=1)
        tol = 1e-12 * np.maximum(1.0, np.abs(means))
        degenerate = np.flatnonzero(stds <= tol)
        if degenerate.size == x.shape[1]:
            raise ZeroVarianceColumn("every column is constant")
        stds = stds.copy()
        stds[degenerate] = 1.0  # flagged column maps to exact zeros
        stats = StandardizationStats(
            means=means, stddevs=stds, degenerate=[int(j) for j in degenerate]
        )
    else:
        if len(stats.means) != x.shape[1]:
            raise LengthMismatch(
                f"stats cover {len(stats.means)} columns, panel has {x.shape[1]}"
            )
    out = (x - stats.means) / stats.stddevs
    if stats.degenerate:
        out[:, stats.degenerate] = 0.0
    return out, stats


def standardize(
    panel: Panel, stats: StandardizationStats | None = None
) -> tuple[Panel, StandardizationStats]:
    """Center and scale each column to sample mean 0 and stddev 1.

    When ``stats`` is given (e.g. fitted on a training window) it is
    applied as-is, so later rows are scaled without look-ahead. Zero
    variance columns are flagged in the returned stats and set to zero,
    which keeps them out of any downstream factor extraction.
    """
    out, stats = standardize_values(panel.values, stats)
    scaled = Panel(
        values=out,
        dates=list(panel.dates),
        names=list(panel.names),
        groups=None if panel.groups is None else list(panel.groups),
        tcodes=None if panel.tcodes is None else list(panel.tcodes),
    )
    if not stats.fitted_on:
        stats.fitted_on = f"rows[0:{panel.n_periods}]"
    return scaled, stats
