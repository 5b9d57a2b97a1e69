"""Penalized lambda paths, least-squares baselines, lag lengths and BIC."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .design import LagDesign, build_design, panel_array
from .prox import PenaltyKind
from .solver import SolverConfig, solve_system

__all__ = [
    "OLS",
    "CoefTensor",
    "FitStats",
    "LambdaPath",
    "LagLengths",
    "bic",
    "fit_stats",
    "fit_path",
    "fit_ols_by_order",
    "max_ls_order",
    "lag_lengths",
    "coef_frame",
]

logger = logging.getLogger(__name__)

OLS = "ols"
ZERO_TOL = 1e-8


@dataclass
class CoefTensor:
    """Coefficients ``beta[i, j, l - 1]``: equation ``i``, series ``j``, lag ``l``.

    ``series`` maps the ``j`` axis to panel columns (a single entry for AR fits).
    Ordered-lasso fits carry their ``(beta_plus, beta_minus)`` parts.
    """

    beta: np.ndarray
    kind: str
    lam: float | None = None
    parts: tuple | None = field(default=None, repr=False)
    series: tuple = ()
    converged: bool = True
    iterations: int = 0
    order: int | None = None

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.beta.ndim != 3:
            raise ValueError(f"coefficient tensor must be 3-D (eq, series, lag), got shape {self.beta.shape}")
        if not np.all(np.isfinite(self.beta)):
            raise ValueError("coefficient tensor has non-finite entries")
        if not self.series:
            self.series = tuple(range(self.beta.shape[1]))

    @property
    def p(self) -> int:
        return self.beta.shape[2]

    def matrix(self) -> np.ndarray:
        """(n_eq, q*p) in design column order."""
        return self.beta.reshape(self.beta.shape[0], -1)

    def predict(self, x) -> np.ndarray:
        """Centered forecasts of every equation from one regressor row."""
        return self.matrix() @ np.asarray(x, dtype=float)


@dataclass(frozen=True)
class FitStats:
    loss: float
    df: int
    bic: float
    n: int

    @property
    def valid(self) -> bool:
        return math.isfinite(self.bic)


@dataclass
class LambdaPath:
    """One fit per grid point. For least squares the grid holds lag orders."""

    kind: str
    grid: np.ndarray
    fits: list
    stats: list

    def __len__(self):
        return len(self.fits)

    @property
    def bics(self) -> np.ndarray:
        return np.array([s.bic for s in self.stats])

    @property
    def losses(self) -> np.ndarray:
        return np.array([s.loss for s in self.stats])

    @property
    def dfs(self) -> np.ndarray:
        return np.array([s.df for s in self.stats])


@dataclass(frozen=True)
class LagLengths:
    """Estimated lag length per (equation, series); real-valued after averaging."""

    p_hat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_hat", np.asarray(self.p_hat, dtype=float))


def bic(loss: float, df: int, n: int) -> float:
    """``n * log(loss) + df * log(n)``."""
    if not loss > 0:
        raise ValueError(f"BIC needs a positive loss, got {loss}")
    if n < 2:
        raise ValueError(f"BIC needs n >= 2, got {n}")
    return n * math.log(loss) + df * math.log(n)


def fit_stats(design: LagDesign, coef: CoefTensor, zero_tol: float = ZERO_TOL) -> FitStats:
    """Half residual sum of squares over all equations, nonzero count, joint BIC."""
    resid = design.Y - design.X @ coef.matrix().T
    loss = 0.5 * float(np.sum(resid * resid))
    df = int(np.count_nonzero(np.abs(coef.beta) > zero_tol))
    try:
        value = bic(loss, df, design.n)
    except ValueError:
        logger.info("%s fit at %s has zero loss; excluded from weighting", coef.kind, coef.lam)
        value = math.nan
    return FitStats(loss=loss, df=df, bic=value, n=design.n)


def fit_path(
    design: LagDesign,
    kind,
    grid,
    config: SolverConfig | None = None,
    zero_tol: float = ZERO_TOL,
) -> LambdaPath:
    """Solve along the grid from the largest to the smallest value, warm-starting each fit.

    ``grid`` is a LambdaGrid or any sequence of nonnegative values; the path is
    returned in descending order.
    """
    kind = PenaltyKind.parse(kind)
    config = config or SolverConfig()
    values = np.asarray(getattr(grid, "values", grid), dtype=float)
    if values.size == 0:
        raise ValueError("empty sparsity grid")
    values = np.sort(values)[::-1]
    fits, stats = [], []
    warm = None
    for lam in values:
        cfg = SolverConfig(
            max_iterations=config.max_iterations,
            tolerance=config.tolerance,
            objective_tolerance=config.objective_tolerance,
            step_rule=config.step_rule,
            warm_start=warm,
        )
        try:
            coef = solve_system(design, float(lam), kind, cfg)
        except Exception as exc:
            raise RuntimeError(f"{kind.value} solve failed at lambda={lam:.6g}: {exc}") from exc
        fits.append(coef)
        stats.append(fit_stats(design, coef, zero_tol))
        warm = coef.matrix()
    return LambdaPath(kind=kind.value, grid=values, fits=fits, stats=stats)


def max_ls_order(n_obs: int, q: int, p: int | None = None, h: int | None = None) -> int:
    """Largest lag order estimable by least squares.

    Without ``h`` this counts raw time points: the largest ``m`` with
    ``q * m < n_obs``. With ``h`` it counts the regression rows that an order-``m``
    design actually has, ``n_obs - m - h + 1``, so the normal equations stay
    nonsingular.
    """
    cap = p if p is not None else n_obs
    best = 0
    for m in range(1, cap + 1):
        rows = n_obs if h is None else n_obs - m - h + 1
        if q * m < rows:
            best = m
        else:
            break
    return best


def fit_ols_by_order(
    panel,
    p_ls: int,
    h: int = 1,
    p: int | None = None,
    subset: int | None = None,
    zero_tol: float = ZERO_TOL,
) -> LambdaPath:
    """Least-squares fits of orders ``m = 1..p_ls`` on a common sample.

    All orders use the rows available to the order-``p_ls`` design so their BICs
    are comparable. Tensors are zero-padded to ``p`` lags (default ``p_ls``).
    """
    if p_ls < 1:
        raise ValueError(f"p_ls must be >= 1, got {p_ls}")
    p = p_ls if p is None else p
    if p < p_ls:
        raise ValueError(f"padding lag {p} below the largest order {p_ls}")
    design = build_design(panel_array(panel), p_ls, h, subset=subset)
    q = design.q
    fits, stats = [], []
    for m in range(1, p_ls + 1):
        cols = np.concatenate([np.arange(j * p_ls, j * p_ls + m) for j in range(q)])
        Xm = design.X[:, cols]
        if Xm.shape[0] <= Xm.shape[1] or np.linalg.matrix_rank(Xm) < Xm.shape[1]:
            raise np.linalg.LinAlgError(f"least squares of order m={m} is singular ({Xm.shape[0]} rows, {Xm.shape[1]} columns)")
        coefs, *_ = np.linalg.lstsq(Xm, design.Y, rcond=None)
        beta = np.zeros((design.n_eq, q, p))
        beta[:, :, :m] = coefs.T.reshape(design.n_eq, q, m)
        coef = CoefTensor(beta=beta, kind=OLS, series=design.series, order=m)
        resid = design.Y - Xm @ coefs
        loss = 0.5 * float(np.sum(resid * resid))
        df = design.n_eq * q * m
        try:
            value = bic(loss, df, design.n)
        except ValueError:
            value = math.nan
        fits.append(coef)
        stats.append(FitStats(loss=loss, df=df, bic=value, n=design.n))
    return LambdaPath(kind=OLS, grid=np.arange(1, p_ls + 1, dtype=float), fits=fits, stats=stats)


def lag_lengths(coef: CoefTensor, zero_tol: float = ZERO_TOL) -> LagLengths:
    """Largest lag with ``|beta| > zero_tol`` per (equation, series); 0 when none."""
    if zero_tol < 0:
        raise ValueError("zero_tol must be >= 0")
    nonzero = np.abs(coef.beta) > zero_tol
    lags = np.arange(1, coef.p + 1)
    return LagLengths(np.max(np.where(nonzero, lags, 0), axis=2))


def coef_frame(path: LambdaPath, names=None):
    """Long-format coefficient dump ordered by (grid point, i, j, l)."""
    import pandas as pd

    records = []
    for m, coef in enumerate(path.fits):
        n_eq, q, p = coef.beta.shape
        eq_names = [_name(names, coef.series[i] if n_eq == q else i) for i in range(n_eq)]
        for i in range(n_eq):
            for j in range(q):
                for l in range(p):
                    records.append((m, path.grid[m], eq_names[i], _name(names, coef.series[j]), l + 1, coef.beta[i, j, l]))
    return pd.DataFrame(records, columns=["point", "grid_value", "equation", "series", "lag", "beta"])


def _name(names, idx):
    return names[idx] if names is not None else idx
