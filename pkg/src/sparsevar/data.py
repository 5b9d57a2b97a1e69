"""Realized-variance ingestion, monthly aggregation, log-centering and descriptives."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

__all__ = [
    "DataError",
    "RawPanel",
    "TimeSeriesPanel",
    "ingest_csv",
    "aggregate_monthly",
    "log_center",
    "descriptives",
    "DESCRIPTIVE_COLUMNS",
    "write_panel",
    "read_panel",
]

logger = logging.getLogger(__name__)

DAILY = "daily"
MONTHLY = "monthly"
DESCRIPTIVE_COLUMNS = ["mean", "std", "skewness", "kurtosis", "acf1"]


class DataError(ValueError):
    """Input data violates the panel contract."""


@dataclass(frozen=True)
class RawPanel:
    """Realized variances: rows are dates, columns are index names."""

    dates: pd.Index
    values: np.ndarray
    names: tuple
    frequency: str
    dropped: int = 0

    def __len__(self):
        return self.values.shape[0]

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=self.dates, columns=list(self.names))


@dataclass(frozen=True)
class TimeSeriesPanel:
    """Centered log realized variances with the column means that were removed."""

    dates: pd.PeriodIndex
    values: np.ndarray
    means: np.ndarray
    names: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError(f"panel values must be 2-D, got shape {values.shape}")
        if len(self.dates) != values.shape[0] or len(self.names) != values.shape[1] or len(self.means) != values.shape[1]:
            raise DataError("dates, names and means must match the value matrix")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "means", np.asarray(self.means, dtype=float))

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def q(self) -> int:
        return self.values.shape[1]

    def uncentered(self) -> np.ndarray:
        return self.values + self.means

    @classmethod
    def from_log_values(cls, dates, log_values, names) -> "TimeSeriesPanel":
        log_values = np.asarray(log_values, dtype=float)
        means = log_values.mean(axis=0)
        return cls(dates=pd.PeriodIndex(dates, freq="M"), values=log_values - means, means=means, names=tuple(names))


def _parse_dates(raw: pd.Series) -> tuple[pd.DatetimeIndex, str]:
    text = raw.astype(str).str.strip()
    if text.str.fullmatch(r"\d{4}-\d{2}-\d{2}").all():
        fmt, freq = "%Y-%m-%d", DAILY
    elif text.str.fullmatch(r"\d{4}-\d{2}").all():
        fmt, freq = "%Y-%m", MONTHLY
    else:
        bad = text[~text.str.fullmatch(r"\d{4}-\d{2}(-\d{2})?")]
        where = bad.index[0] if len(bad) else text.index[0]
        raise DataError(f"unparseable or mixed date format at data row {where + 1}: {text[where]!r}")
    parsed = pd.to_datetime(text, format=fmt, errors="coerce")
    if parsed.isna().any():
        where = parsed[parsed.isna()].index[0]
        raise DataError(f"unparseable date at data row {where + 1}: {text[where]!r}")
    return pd.DatetimeIndex(parsed), freq


def ingest_csv(path, schema=None) -> RawPanel:
    """Read ``date,<name1>,...`` realized variances.

    Rows with any missing cell are dropped and counted. Nonpositive values,
    unparseable dates and duplicate dates are rejected. ``schema`` selects and
    orders the value columns; all must be present.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such input file: {path}")
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    if df.shape[1] < 2:
        raise DataError("expected a date column followed by at least one value column")
    date_col = df.columns[0]
    names = [c for c in df.columns[1:]]
    if schema is not None:
        missing = [c for c in schema if c not in names]
        if missing:
            raise DataError(f"columns missing from {path.name}: {', '.join(missing)}")
        names = list(schema)

    cells = df[names].apply(lambda col: col.str.strip())
    empty = cells.eq("") | cells.isin(["NA", "NaN", "nan", "null"])
    numeric = cells.mask(empty).apply(pd.to_numeric, errors="coerce")
    garbage = numeric.isna() & ~empty
    if garbage.any().any():
        row, col = np.argwhere(garbage.to_numpy())[0]
        raise DataError(f"non-numeric value {cells.iat[row, col]!r} in column {names[col]} at data row {row + 1}")

    keep = ~empty.any(axis=1)
    dropped = int((~keep).sum())
    if dropped:
        logger.warning("dropped %d row(s) with missing values from %s", dropped, path.name)
    df, numeric = df[keep].reset_index(drop=True), numeric[keep].reset_index(drop=True)
    if len(df) == 0:
        raise DataError("no complete rows left after dropping missing values")

    dates, freq = _parse_dates(df[date_col])
    values = numeric.to_numpy(dtype=float)
    bad = np.argwhere(~(values > 0))
    if len(bad):
        row, col = bad[0]
        raise DataError(f"nonpositive realized variance {values[row, col]} in column {names[col]} on {df[date_col].iat[row]}")

    order = np.argsort(dates.values, kind="stable")
    dates, values = dates[order], values[order]
    dup = dates.duplicated()
    if dup.any():
        raise DataError(f"duplicate date {dates[dup][0].date()}")
    if freq == MONTHLY:
        dates = dates.to_period("M")
    return RawPanel(dates=dates, values=values, names=tuple(names), frequency=freq, dropped=dropped)


def aggregate_monthly(raw: RawPanel) -> RawPanel:
    """Sum daily realized variances within each calendar month."""
    if raw.frequency != DAILY:
        raise DataError(f"aggregate_monthly expects daily data, got {raw.frequency}")
    frame = raw.frame()
    months = frame.index.to_period("M")
    summed = frame.groupby(months, sort=True).sum()
    full = pd.period_range(summed.index.min(), summed.index.max(), freq="M")
    gaps = full.difference(summed.index)
    if len(gaps):
        logger.warning("months without retained days dropped: %s", ", ".join(str(m) for m in gaps))
    return RawPanel(
        dates=pd.PeriodIndex(summed.index, freq="M"),
        values=summed.to_numpy(dtype=float),
        names=raw.names,
        frequency=MONTHLY,
        dropped=raw.dropped,
    )


def log_center(raw: RawPanel) -> TimeSeriesPanel:
    if raw.frequency != MONTHLY:
        raise DataError(f"log_center expects monthly data, got {raw.frequency}; aggregate first")
    if not np.all(raw.values > 0):
        raise DataError("log transform needs strictly positive values")
    return TimeSeriesPanel.from_log_values(raw.dates, np.log(raw.values), raw.names)


def descriptives(panel: TimeSeriesPanel) -> pd.DataFrame:
    """Mean, sd, skewness, kurtosis and lag-1 autocorrelation of the uncentered log series.

    Skewness and kurtosis use biased moment estimators (kurtosis is not excess);
    the sd uses ``T - 1``.
    """
    if panel.T < 3:
        raise DataError(f"descriptives need at least 3 observations, got {panel.T}")
    x = panel.uncentered()
    mean = x.mean(axis=0)
    dev = x - mean
    m2 = (dev**2).mean(axis=0)
    if np.any(m2 <= 0):
        flat = [panel.names[i] for i in np.flatnonzero(m2 <= 0)]
        raise DataError(f"zero-variance series: {', '.join(map(str, flat))}")
    m3 = (dev**3).mean(axis=0)
    m4 = (dev**4).mean(axis=0)
    acf1 = (dev[1:] * dev[:-1]).sum(axis=0) / (dev**2).sum(axis=0)
    return pd.DataFrame(
        {
            "mean": mean,
            "std": x.std(axis=0, ddof=1),
            "skewness": m3 / m2**1.5,
            "kurtosis": m4 / m2**2,
            "acf1": acf1,
        },
        index=pd.Index(panel.names, name="index"),
    )[DESCRIPTIVE_COLUMNS]


def write_panel(panel: TimeSeriesPanel, out_dir) -> None:
    """Write ``panel.csv`` (centered log values) and ``means.csv`` (centering constants)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(panel.values, index=pd.Index(panel.dates.astype(str), name="date"), columns=list(panel.names))
    frame.to_csv(out / "panel.csv")
    pd.DataFrame({"index": list(panel.names), "mean": panel.means}).to_csv(out / "means.csv", index=False)


def read_panel(path) -> TimeSeriesPanel:
    """Load a panel written by :func:`write_panel`; ``path`` is its directory."""
    path = Path(path)
    panel_file, means_file = path / "panel.csv", path / "means.csv"
    for f in (panel_file, means_file):
        if not f.is_file():
            raise FileNotFoundError(f"panel artifact incomplete: {f} not found")
    frame = pd.read_csv(panel_file, index_col=0, dtype={0: str}, float_precision="round_trip")
    means = pd.read_csv(means_file, float_precision="round_trip").set_index("index")["mean"]
    names = tuple(frame.columns)
    missing = [n for n in names if n not in means.index]
    if missing:
        raise DataError(f"means.csv lacks entries for {', '.join(missing)}")
    return TimeSeriesPanel(
        dates=pd.PeriodIndex(frame.index, freq="M"),
        values=frame.to_numpy(dtype=float),
        means=means.loc[list(names)].to_numpy(dtype=float),
        names=names,
    )
