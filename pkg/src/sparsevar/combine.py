"""Sparsity grids, combination weights and combined forecasts."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .design import LagDesign
from .estimators import LagLengths
from .prox import lambda_max

__all__ = [
    "LambdaGrid",
    "WeightScheme",
    "ForecastSet",
    "build_grid",
    "weights",
    "combine_forecasts",
    "combined_lag_lengths",
    "select_by_bic",
]

logger = logging.getLogger(__name__)

WITH_ZERO = "log-spaced-with-zero"
FLOOR = "log-spaced-floor"


@dataclass(frozen=True)
class LambdaGrid:
    values: np.ndarray
    construction: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("grid needs at least one value")
        if np.any(np.diff(values) >= 0):
            raise ValueError("grid values must be strictly decreasing")
        object.__setattr__(self, "values", values)

    @property
    def L(self) -> int:
        return self.values.size

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values)


class WeightScheme(str, enum.Enum):
    BIC = "bic"
    EQUAL = "equal"
    MSE = "mse"

    @classmethod
    def parse(cls, value) -> "WeightScheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown weight scheme {value!r}; expected bic, equal or mse") from None


def build_grid(design: LagDesign, kind, L: int = 20, inner_floor: float = 1e-3) -> LambdaGrid:
    """Descending grid from the zero-threshold down.

    When the regression has no more parameters per equation than rows, the
    last point is exactly 0 and the other ``L - 1`` points are log-spaced over
    ``[inner_floor * top, top]``. Otherwise all ``L`` points are log-spaced over
    ``[top / 10, top]``.
    """
    if L < 2:
        raise ValueError(f"grid length must be >= 2, got {L}")
    top = lambda_max(kind, design)
    if design.X.shape[1] <= design.n:
        if L == 2:
            values = np.array([top, 0.0])
        else:
            values = np.append(top * np.logspace(0.0, math.log10(inner_floor), L - 1), 0.0)
        values[0] = top
        return LambdaGrid(values, WITH_ZERO)
    values = top * np.logspace(0.0, -1.0, L)
    values[0] = top
    return LambdaGrid(values, FLOOR)


def weights(stats, scheme=WeightScheme.BIC) -> np.ndarray:
    """Combination weights over grid points; invalid points (no finite BIC) get 0.

    ``bic`` is a softmax of ``-0.5 * BIC`` (shifted by its max), ``equal`` spreads
    evenly, ``mse`` is proportional to the inverse in-sample mean squared residual.
    """
    scheme = WeightScheme.parse(scheme)
    stats = list(stats)
    valid = np.array([s.valid for s in stats], dtype=bool)
    if not valid.any():
        raise ValueError("no grid point has a finite BIC; cannot form weights")
    if (~valid).any():
        logger.info("excluding %d grid point(s) with zero loss from combination", int((~valid).sum()))
    w = np.zeros(len(stats))
    if scheme is WeightScheme.BIC:
        bics = np.array([s.bic for s in stats])
        a = -0.5 * bics[valid]
        e = np.exp(a - a.max())
        w[valid] = e / e.sum()
    elif scheme is WeightScheme.EQUAL:
        w[valid] = 1.0 / valid.sum()
    else:
        # summed loss over equations: the equation count rescales every MSE alike
        mse = np.array([2.0 * s.loss / s.n for s in stats])
        inv = 1.0 / mse[valid]
        w[valid] = inv / inv.sum()
    return w


def select_by_bic(stats) -> int:
    """Index of the smallest finite BIC; ties go to the earlier (sparser) point."""
    bics = np.array([s.bic if s.valid else np.inf for s in stats], dtype=float)
    if not np.isfinite(bics).any():
        raise ValueError("no grid point has a finite BIC")
    return int(np.argmin(bics))


@dataclass
class ForecastSet:
    """Combined forecasts on the uncentered log scale.

    ``combined`` has one entry per series. ``individual`` holds the per-grid-point
    forecasts (L, q), also uncentered.
    """

    combined: np.ndarray
    individual: np.ndarray
    weights: np.ndarray
    scheme: str
    horizon: int | None = None


def combine_forecasts(individual, w, means=None, scheme: str = "bic", horizon: int | None = None) -> ForecastSet:
    """Weighted sum of per-grid-point centered forecasts, then add the centering means back.

    ``individual`` is (L,) or (L, q). Weights are taken to sum to one, which
    :func:`weights` guarantees.
    """
    ind = np.asarray(individual, dtype=float)
    if ind.ndim == 1:
        ind = ind[:, None]
    w = np.asarray(w, dtype=float)
    if w.shape[0] != ind.shape[0]:
        raise ValueError(f"{ind.shape[0]} forecasts but {w.shape[0]} weights")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be nonnegative and sum to one")
    bad = ~np.all(np.isfinite(ind), axis=1)
    if bad.any():
        raise ValueError(f"non-finite forecast at grid point {int(np.flatnonzero(bad)[0])}")
    shift = 0.0 if means is None else np.asarray(means, dtype=float)
    # written relative to the heaviest forecast: a one-hot weight returns that
    # forecast bit for bit and identical forecasts combine to themselves exactly
    anchor = int(np.argmax(w))
    used = w > 0
    used[anchor] = False
    combined = ind[anchor] + w[used] @ (ind[used] - ind[anchor]) + shift
    return ForecastSet(combined=combined, individual=ind + shift, weights=w, scheme=str(scheme), horizon=horizon)


def combined_lag_lengths(per_point, w) -> LagLengths:
    """Weighted average of per-grid-point lag lengths."""
    arrays = np.stack([np.asarray(getattr(x, "p_hat", x), dtype=float) for x in per_point])
    w = np.asarray(w, dtype=float)
    if w.shape[0] != arrays.shape[0]:
        raise ValueError(f"{arrays.shape[0]} lag-length sets but {w.shape[0]} weights")
    return LagLengths(np.tensordot(w, arrays, axes=1))
