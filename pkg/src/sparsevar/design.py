"""Lagged design matrices for direct h-step forecasting."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["LagDesign", "build_design", "latest_lags", "panel_array"]


def panel_array(panel) -> np.ndarray:
    """Return a (T, q) float array from a TimeSeriesPanel, 2-D or 1-D array."""
    values = getattr(panel, "values", panel)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.ndim != 2:
        raise ValueError(f"panel values must be 1-D or 2-D, got shape {values.shape}")
    return values


@dataclass(frozen=True)
class LagDesign:
    """Regressors ``X`` (n, q*p) and h-step targets ``Y`` (n, n_eq).

    Column ``j * p + (l - 1)`` of ``X`` holds series ``j`` at lag ``l``.
    ``series`` lists the panel columns that enter ``X``; ``Y`` has one column per
    equation, which for the VAR case are the same series.
    """

    X: np.ndarray
    Y: np.ndarray
    p: int
    h: int
    series: tuple

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def q(self) -> int:
        """Number of series in the regressors."""
        return len(self.series)

    @property
    def n_eq(self) -> int:
        return self.Y.shape[1]

    @cached_property
    def gram(self) -> np.ndarray:
        return self.X.T @ self.X

    @cached_property
    def xty(self) -> np.ndarray:
        return self.X.T @ self.Y

    @cached_property
    def yty(self) -> np.ndarray:
        return np.einsum("ij,ij->j", self.Y, self.Y)


def build_design(panel, p: int, h: int = 1, subset: int | None = None) -> LagDesign:
    """Stack lags ``1..p`` of every series against targets ``h`` steps ahead.

    Row ``r`` (0-based) targets time ``p + h - 1 + r`` and its regressors are the
    lags relative to time ``p - 1 + r``. With ``subset=i`` only series ``i``
    enters, on both sides (the univariate AR design).
    """
    values = panel_array(panel)
    T, q = values.shape
    if p < 1 or h < 1:
        raise ValueError(f"need p >= 1 and h >= 1, got p={p}, h={h}")
    if T < p + h:
        raise ValueError(f"series of length {T} too short for p={p}, h={h}: need at least {p + h} points")
    if subset is not None:
        if not 0 <= subset < q:
            raise IndexError(f"series {subset} outside 0..{q - 1}")
        values = values[:, [subset]]
        series = (subset,)
    else:
        series = tuple(range(q))
    n = T - p - h + 1
    k = values.shape[1]
    X = np.empty((n, k * p))
    for l in range(1, p + 1):
        # lag l relative to anchor time p - 1 + r is time p - l + r
        X[:, l - 1 :: p] = values[p - l : p - l + n]
    Y = values[p + h - 1 : p + h - 1 + n].copy()
    return LagDesign(X=X, Y=Y, p=p, h=h, series=series)


def latest_lags(panel, p: int, subset: int | None = None) -> np.ndarray:
    """Regressor row for a forecast issued at the last time point of ``panel``."""
    values = panel_array(panel)
    if values.shape[0] < p:
        raise ValueError(f"need at least {p} observations, got {values.shape[0]}")
    if subset is not None:
        values = values[:, [subset]]
    # x[j * p + l - 1] = values[T - l, j]
    return values[::-1][:p].T.ravel().copy()
