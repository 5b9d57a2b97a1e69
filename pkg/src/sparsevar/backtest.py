"""Out-of-sample evaluation over expanding or rolling estimation windows.

At every origin ``t`` (the number of observations available), each method is
re-estimated on the training window only, the window is re-centered with its
own means, and direct ``h``-step forecasts are compared with the realized
log variances.
"""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from .combine import WeightScheme, build_grid, combine_forecasts, select_by_bic, weights
from .design import build_design, latest_lags
from .estimators import ZERO_TOL, fit_ols_by_order, fit_path, max_ls_order
from .solver import SolverConfig

__all__ = [
    "ESTIMATORS",
    "MODELS",
    "Method",
    "all_methods",
    "BacktestConfig",
    "BacktestReport",
    "forecast_origin",
    "run_backtest",
    "afe",
    "mafe",
    "subperiod_mafe",
]

logger = logging.getLogger(__name__)

ESTIMATORS = ("ols", "lasso", "hierarchical", "ordered")
MODELS = ("ar", "var")
EXPANDING = "expanding"
ROLLING = "rolling"


@dataclass(frozen=True, order=True)
class Method:
    model: str
    estimator: str
    combined: bool

    @property
    def name(self) -> str:
        return f"{self.model}_{self.estimator}_{'fc' if self.combined else 'nofc'}"

    @classmethod
    def parse(cls, name: str) -> "Method":
        try:
            model, estimator, fc = name.lower().split("_")
        except ValueError:
            raise ValueError(f"method names look like 'var_ordered_fc', got {name!r}") from None
        if model not in MODELS or estimator not in ESTIMATORS or fc not in ("fc", "nofc"):
            raise ValueError(f"unknown method {name!r}")
        return cls(model, estimator, fc == "fc")


def all_methods() -> tuple:
    return tuple(Method(m, e, c).name for m in MODELS for e in ESTIMATORS for c in (False, True))


@dataclass(frozen=True)
class BacktestConfig:
    horizons: tuple = (1, 2, 3, 6)
    window: str = EXPANDING
    S: int | None = None
    start: int | None = None
    p: int = 36
    L: int = 20
    scheme: str = "bic"
    methods: tuple = field(default_factory=all_methods)
    inner_floor: float = 1e-3
    zero_tol: float = ZERO_TOL
    solver: SolverConfig = field(default_factory=SolverConfig)
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "horizons", tuple(sorted(int(h) for h in self.horizons)))
        object.__setattr__(self, "methods", tuple(Method.parse(m).name for m in self.methods))
        object.__setattr__(self, "scheme", WeightScheme.parse(self.scheme).value)
        if not self.horizons or self.horizons[0] < 1:
            raise ValueError("horizons must be positive integers")
        if not self.methods:
            raise ValueError("at least one method is required")
        if self.window not in (EXPANDING, ROLLING):
            raise ValueError(f"window must be {EXPANDING!r} or {ROLLING!r}, got {self.window!r}")
        if self.window == ROLLING:
            if self.S is None:
                raise ValueError("rolling window needs S")
            if self.S < self.p + max(self.horizons) + 1:
                raise ValueError(f"rolling window S={self.S} shorter than p + max horizon + 1 = {self.p + max(self.horizons) + 1}")
        if self.p < 1 or self.L < 2:
            raise ValueError("need p >= 1 and L >= 2")

    def first_origin(self, T: int) -> int:
        return T // 2 if self.start is None else int(self.start)

    def validate(self, T: int) -> None:
        start = self.first_origin(T)
        if start < 2:
            raise ValueError(f"first origin {start} leaves no history")
        if start + self.horizons[0] > T:
            raise ValueError(f"first origin {start} plus horizon {self.horizons[0]} exceeds T={T}")

    def snapshot(self) -> dict:
        out = asdict(self)
        out["solver"] = {k: v for k, v in asdict(self.solver).items() if k != "warm_start"}
        out["horizons"] = list(self.horizons)
        out["methods"] = list(self.methods)
        return out

    @classmethod
    def from_snapshot(cls, snap: dict) -> "BacktestConfig":
        snap = dict(snap)
        snap["solver"] = SolverConfig(**snap.get("solver", {}))
        snap["horizons"] = tuple(snap["horizons"])
        snap["methods"] = tuple(snap["methods"])
        return cls(**snap)


def afe(errors) -> float:
    """Mean absolute forecast error."""
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise ValueError("no forecast errors")
    return float(np.mean(np.abs(errors)))


def mafe(errors, sigmas) -> float:
    """Average over series of the mean of ``|e| / sigma``.

    ``errors`` and ``sigmas`` are (origins, series); ``sigmas`` holds the sd of
    each series over the history available at each origin.
    """
    errors = np.asarray(errors, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    if errors.ndim == 1:
        errors, sigmas = errors[:, None], sigmas[:, None]
    if errors.shape != sigmas.shape:
        raise ValueError(f"errors {errors.shape} and sigmas {sigmas.shape} differ in shape")
    if errors.size == 0:
        raise ValueError("no forecast errors")
    if not np.all(sigmas > 0):
        raise ValueError("scaling standard deviations must be positive")
    return float(np.mean(np.mean(np.abs(errors) / sigmas, axis=0)))


@dataclass
class BacktestReport:
    """Forecasts, realizations and scales per horizon; AFE/MAFE derive from them.

    ``origins[h]`` holds the training-set sizes ``t`` of the retained origins, so
    the forecast targets sit at 0-based rows ``t + h - 1`` of the panel.
    """

    methods: tuple
    horizons: tuple
    names: tuple
    origins: dict
    target_dates: dict
    forecasts: dict
    actuals: dict
    sigmas: dict
    skipped: dict
    config: dict = field(default_factory=dict)

    def errors(self, method: str, h: int) -> np.ndarray:
        return self.actuals[h] - self.forecasts[(method, h)]

    def afe_table(self) -> pd.DataFrame:
        rows = []
        for i, name in enumerate(self.names):
            for h in self.horizons:
                rows.append([name, h] + [afe(self.errors(m, h)[:, i]) for m in self.methods])
        return pd.DataFrame(rows, columns=["index", "horizon", *self.methods]).set_index(["index", "horizon"])

    def mafe_table(self) -> pd.DataFrame:
        rows = [[h] + [mafe(self.errors(m, h), self.sigmas[h]) for m in self.methods] for h in self.horizons]
        return pd.DataFrame(rows, columns=["horizon", *self.methods]).set_index("horizon")

    def audit_records(self):
        for h in self.horizons:
            for k, t in enumerate(self.origins[h]):
                for m in self.methods:
                    yield {
                        "method": m,
                        "horizon": int(h),
                        "origin": int(t),
                        "target_date": str(self.target_dates[h][k]),
                        "forecast": [float(v) for v in self.forecasts[(m, h)][k]],
                        "actual": [float(v) for v in self.actuals[h][k]],
                    }

    def write(self, out_dir) -> None:
        from pathlib import Path

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.afe_table().to_csv(out / "afe.csv", float_format="%.12g")
        self.mafe_table().to_csv(out / "mafe.csv", float_format="%.12g")
        with open(out / "audit.jsonl", "w") as fh:
            for rec in self.audit_records():
                fh.write(json.dumps(rec) + "\n")


def subperiod_mafe(report: BacktestReport, start, end) -> pd.DataFrame:
    """MAFE per horizon and method over origins whose target month lies in ``[start, end]``."""
    lo, hi = pd.Period(start, freq="M"), pd.Period(end, freq="M")
    rows = []
    for h in report.horizons:
        targets = pd.PeriodIndex(report.target_dates[h], freq="M")
        mask = np.asarray((targets >= lo) & (targets <= hi))
        if not mask.any():
            raise ValueError(f"no forecast targets between {lo} and {hi} at horizon {h}")
        rows.append([h] + [mafe(report.errors(m, h)[mask], report.sigmas[h][mask]) for m in report.methods])
    return pd.DataFrame(rows, columns=["horizon", *report.methods]).set_index("horizon")


def _window_bounds(t: int, config: BacktestConfig) -> int:
    if config.window == ROLLING:
        return max(0, t - config.S)
    return 0


def _path_forecasts(design, x, kind, config: BacktestConfig):
    grid = build_grid(design, kind, config.L, config.inner_floor)
    path = fit_path(design, kind, grid, config.solver, config.zero_tol)
    preds = np.stack([f.predict(x) for f in path.fits])
    return preds, path.stats


def _ols_forecasts(centered, x, h, subset, config: BacktestConfig):
    q = 1 if subset is not None else centered.shape[1]
    p_ls = max_ls_order(centered.shape[0], q, config.p, h)
    path = fit_ols_by_order(centered, p_ls, h, p=config.p, subset=subset, zero_tol=config.zero_tol)
    preds = np.stack([f.predict(x) for f in path.fits])
    return preds, path.stats


def _combine_pair(preds, stats, means, scheme):
    """(combined, BIC-selected) forecasts; both go through the same weighted sum."""
    w = weights(stats, scheme)
    onehot = np.zeros(len(stats))
    onehot[select_by_bic(stats)] = 1.0
    return combine_forecasts(preds, w, means).combined, combine_forecasts(preds, onehot, means).combined


def forecast_origin(log_values: np.ndarray, t: int, h: int, config: BacktestConfig) -> dict | None:
    """Forecasts of every configured method for target row ``t + h - 1``.

    ``log_values`` is the uncentered (T, q) log panel; only rows ``< t`` are read.
    Returns None when the training window is too short.
    """
    lo = _window_bounds(t, config)
    window = np.asarray(log_values[lo:t], dtype=float)
    n_obs, q = window.shape
    if n_obs < config.p + h + 1:
        return None
    if any(Method.parse(m).estimator == "ols" for m in config.methods):
        q_ols = q if any(Method.parse(m).model == "var" for m in config.methods) else 1
        if max_ls_order(n_obs, q_ols, config.p, h) < 1:
            return None
    means = window.mean(axis=0)
    centered = window - means
    # a constant series carries no signal: its forecast is its level
    flat = np.ptp(window, axis=0) == 0
    wanted = [Method.parse(m) for m in config.methods]
    out = {}
    for model in MODELS:
        estimators = sorted({m.estimator for m in wanted if m.model == model}, key=ESTIMATORS.index)
        for est in estimators:
            if model == "var":
                x = latest_lags(centered, config.p)
                if flat.all():
                    fc = nofc = means.copy()
                else:
                    if est == "ols":
                        preds, stats = _ols_forecasts(centered, x, h, None, config)
                    else:
                        preds, stats = _path_forecasts(build_design(centered, config.p, h), x, est, config)
                    fc, nofc = _combine_pair(preds, stats, means, config.scheme)
            else:
                fc, nofc = np.empty(q), np.empty(q)
                for i in range(q):
                    x = latest_lags(centered, config.p, subset=i)
                    if flat[i]:
                        fc[i] = nofc[i] = means[i]
                        continue
                    if est == "ols":
                        preds, stats = _ols_forecasts(centered, x, h, i, config)
                    else:
                        preds, stats = _path_forecasts(build_design(centered, config.p, h, subset=i), x, est, config)
                    fc_i, nofc_i = _combine_pair(preds, stats, means[i], config.scheme)
                    fc[i], nofc[i] = fc_i[0], nofc_i[0]
            out[Method(model, est, True).name] = fc
            out[Method(model, est, False).name] = nofc
    return {m: out[m] for m in config.methods}


def _task(args):
    log_values, t, h, config = args
    return forecast_origin(log_values, t, h, config)


def run_backtest(panel, config: BacktestConfig | None = None, progress: bool = False) -> BacktestReport:
    """Evaluate all configured methods at origins ``start .. T - h`` for every horizon."""
    config = config or BacktestConfig()
    log_values = np.asarray(panel.uncentered(), dtype=float)
    T, q = log_values.shape
    config.validate(T)
    start = config.first_origin(T)
    dates = pd.PeriodIndex(panel.dates, freq="M") if getattr(panel, "dates", None) is not None else None

    tasks = [(h, t) for h in config.horizons for t in range(start, T - h + 1)]
    logger.info("backtest: %d origin/horizon tasks, %d methods", len(tasks), len(config.methods))
    payload = [(log_values, t, h, config) for h, t in tasks]
    threads = max(1, int(config.threads or 1))
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_task, payload, chunksize=max(1, len(tasks) // (4 * threads))))
    else:
        results = []
        for k, item in enumerate(payload):
            results.append(_task(item))
            if progress and (k + 1) % 10 == 0:
                logger.info("backtest: %d / %d tasks done", k + 1, len(tasks))

    origins, target_dates, actuals, sigmas, skipped = {}, {}, {}, {}, {}
    forecasts = {}
    for h in config.horizons:
        kept = [(t, res) for (hh, t), res in zip(tasks, results) if hh == h and res is not None]
        skipped[h] = sum(1 for (hh, _), res in zip(tasks, results) if hh == h and res is None)
        if skipped[h]:
            logger.warning("horizon %d: skipped %d origin(s) with too little history", h, skipped[h])
        if not kept:
            raise ValueError(f"no usable forecast origins at horizon {h}")
        ts = np.array([t for t, _ in kept])
        origins[h] = ts
        target_dates[h] = [str(dates[t + h - 1]) if dates is not None else str(t + h - 1) for t in ts]
        actuals[h] = log_values[ts + h - 1]
        sigmas[h] = np.stack([log_values[:t].std(axis=0, ddof=1) for t in ts])
        for m in config.methods:
            forecasts[(m, h)] = np.stack([res[m] for _, res in kept])
    return BacktestReport(
        methods=config.methods,
        horizons=config.horizons,
        names=tuple(getattr(panel, "names", range(q))),
        origins=origins,
        target_dates=target_dates,
        forecasts=forecasts,
        actuals=actuals,
        sigmas=sigmas,
        skipped=skipped,
        config=config.snapshot(),
    )


def default_threads() -> int:
    return os.cpu_count() or 1
