"""Acceptance criteria, each run at its stated tolerance.

Every check appends one ``PASS``/``FAIL`` line to ``RESULTS``; the conftest
prints them in the terminal summary, and running this file directly prints
them as they finish.
"""
from __future__ import annotations

import os
import time
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from _oracles import brute_force_prox, random_design, regression_oracle
from sparsevar.backtest import BacktestConfig, Method, default_threads, forecast_origin, run_backtest
from sparsevar.combine import build_grid, combine_forecasts, combined_lag_lengths, select_by_bic, weights
from sparsevar.data import TimeSeriesPanel, aggregate_monthly, descriptives, ingest_csv, log_center
from sparsevar.design import LagDesign, build_design, latest_lags
from sparsevar.estimators import fit_ols_by_order, fit_path, lag_lengths, max_ls_order
from sparsevar.prox import GroupLayout, lambda_max, prox_hierarchical, prox_lasso, prox_ordered
from sparsevar.simulate import ar_coefs, diagonal_var, simulate_var
from sparsevar.solver import objective, solve_equation, solve_system

RESULTS: list[str] = []

KINDS = ("lasso", "hierarchical", "ordered")


def record(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    assert passed, line


def synthetic_panel(q: int, T: int, seed: int, phi=(0.5, 0.2), level: float = 3.0) -> TimeSeriesPanel:
    coefs = diagonal_var(phi, q)
    if q > 1:
        coefs[0, 1, 0] = 0.1
    values = simulate_var(coefs, T, seed=seed, noise=0.5, level=level)
    dates = pd.period_range("2000-01", periods=T, freq="M")
    return TimeSeriesPanel.from_log_values(dates, values, [f"idx{j}" for j in range(q)])


# --------------------------------------------------------------------------
# 1. prox operators against a brute-force minimizer


def test_criterion_1_prox_oracle():
    rng = np.random.default_rng(101)
    shapes = [(1, 1), (1, 2), (1, 3), (1, 4), (2, 1), (2, 2), (3, 1), (4, 1)]
    worst = {k: 0.0 for k in KINDS}
    prox_time, t0 = 0.0, time.perf_counter()
    for _ in range(200):
        q, p = shapes[rng.integers(len(shapes))]
        z = rng.normal(0, 2, q * p)
        t = float(rng.uniform(0.0, 2.0))
        layout = GroupLayout(q, p)
        s0 = time.perf_counter()
        ours = {
            "lasso": prox_lasso(z, t),
            "hierarchical": prox_hierarchical(z, t, layout),
            "ordered": prox_ordered(z, t, layout)[0],
        }
        prox_time += time.perf_counter() - s0
        for kind in KINDS:
            ref = brute_force_prox(kind, z, t, q, p)
            worst[kind] = max(worst[kind], float(np.abs(ours[kind] - ref).max()))
    elapsed = time.perf_counter() - t0
    passed = max(worst.values()) <= 1e-4 and elapsed < 60
    detail = ", ".join(f"{k} max|diff|={v:.1e}" for k, v in worst.items()) + f"; 200 instances in {elapsed:.1f}s including oracle ({prox_time:.2f}s in our operators; limit 60s)"
    record(1, "prox operators match brute force within 1e-4", passed, detail)


# --------------------------------------------------------------------------
# 2. solver against a high-precision generic convex solver


def test_criterion_2_solver_oracle():
    rng = np.random.default_rng(202)
    worst = {k: 0.0 for k in KINDS}
    solver_time, t0 = 0.0, time.perf_counter()
    for _ in range(50):
        n = int(rng.integers(10, 41))
        q = int(rng.integers(1, 4))
        p = int(rng.integers(1, 12 // q + 1))
        X, y = random_design(rng, n, q, p)
        design = LagDesign(X=X, Y=y[:, None], p=p, h=1, series=tuple(range(q)))
        for kind in KINDS:
            lam = float(rng.uniform(0.01, 0.8)) * lambda_max(kind, design)
            s0 = time.perf_counter()
            res = solve_equation(design, 0, lam, kind)
            solver_time += time.perf_counter() - s0
            ours = objective(design, 0, res.beta, lam, kind)
            _, ref = regression_oracle(X, y, lam, kind, q, p)
            worst[kind] = max(worst[kind], abs(ours - ref) / max(abs(ref), 1e-12))
    elapsed = time.perf_counter() - t0
    passed = max(worst.values()) <= 1e-5 and elapsed < 120
    detail = ", ".join(f"{k} max rel gap={v:.1e}" for k, v in worst.items())
    detail += f"; 50 designs in {elapsed:.1f}s including oracle ({solver_time:.2f}s in our solver; limit 120s)"
    record(2, "solver objective within 1e-5 relative of convex oracle", passed, detail)


# --------------------------------------------------------------------------
# 3. structural invariants of fitted coefficients


def test_criterion_3_structural_invariants():
    rng = np.random.default_rng(303)
    bad = {"hierarchy": 0, "monotone parts": 0, "zero at top": 0}
    for seed in range(100):
        q, p = int(rng.integers(1, 4)), int(rng.integers(2, 7))
        panel = synthetic_panel(q, int(rng.integers(60, 120)), seed, level=0.0).values
        design = build_design(panel, p)
        frac = float(rng.uniform(0.01, 0.5))

        hier = solve_system(design, frac * lambda_max("hierarchical", design), "hierarchical")
        nz = np.abs(hier.beta) > 1e-8
        if np.any(~nz[:, :, :-1] & nz[:, :, 1:]):
            bad["hierarchy"] += 1

        ordered = solve_system(design, frac * lambda_max("ordered", design), "ordered")
        plus, minus = ordered.parts
        ok = all(np.all(part >= 0) and np.all(np.diff(part, axis=2) <= 0) for part in (plus, minus))
        ok &= np.array_equal(plus - minus, ordered.beta)
        if not ok:
            bad["monotone parts"] += 1

        if any(np.any(solve_system(design, lambda_max(k, design), k).beta != 0) for k in KINDS):
            bad["zero at top"] += 1
    passed = not any(bad.values())
    detail = ", ".join(f"{k}: {100 - v}/100" for k, v in bad.items())
    record(3, "structural invariants on 100 seeded fits", passed, detail)


# --------------------------------------------------------------------------
# 4. lag recovery on AR(2) data


def test_criterion_4_lag_recovery():
    p_hat = {k: [] for k in KINDS}
    for seed in range(100):
        y = simulate_var(ar_coefs([0.5, 0.3]), 200, seed=seed)
        design = build_design(y - y.mean(axis=0), 36)
        for kind in KINDS:
            path = fit_path(design, kind, build_grid(design, kind, 20))
            w = weights(path.stats, "bic")
            p_hat[kind].append(combined_lag_lengths([lag_lengths(f) for f in path.fits], w).p_hat[0, 0])
    mean = {k: float(np.mean(v)) for k, v in p_hat.items()}
    passed = mean["ordered"] <= mean["lasso"] and 1.5 <= mean["ordered"] <= 3.5
    detail = ", ".join(f"mean p_hat {k}={v:.2f}" for k, v in mean.items()) + " (need ordered <= lasso and ordered in [1.5, 3.5])"
    record(4, "AR(2) lag recovery, T=200, 100 seeds", passed, detail)


# --------------------------------------------------------------------------
# 5. backtest consistency


def _nofc_by_hand(log_values, t, h, method: Method, config: BacktestConfig) -> np.ndarray:
    """Forecast at the BIC-selected grid point, assembled from the public API."""
    window = log_values[:t]
    means = window.mean(axis=0)
    centered = window - means
    subsets = [None] if method.model == "var" else list(range(centered.shape[1]))
    out = []
    for subset in subsets:
        x = latest_lags(centered, config.p, subset=subset)
        if method.estimator == "ols":
            q = 1 if subset is not None else centered.shape[1]
            path = fit_ols_by_order(centered, max_ls_order(t, q, config.p, h), h, p=config.p, subset=subset)
        else:
            design = build_design(centered, config.p, h, subset=subset)
            path = fit_path(design, method.estimator, build_grid(design, method.estimator, config.L), config.solver)
        preds = np.stack([f.predict(x) for f in path.fits])
        onehot = np.zeros(len(path))
        onehot[select_by_bic(path.stats)] = 1.0
        shift = means if subset is None else means[subset]
        out.append(combine_forecasts(preds, onehot, shift).combined)
    return np.concatenate(out)


def test_criterion_5_backtest_consistency():
    panel = synthetic_panel(3, 120, seed=5)
    cfg = BacktestConfig(p=6, L=10, horizons=(1, 3))
    log_values = panel.uncentered()

    # one-hot combination at the BIC argmin against the reported no-FC forecasts
    onehot_ok, checked = True, 0
    for t in (60, 85, 117):
        got = forecast_origin(log_values, t, 1, cfg)
        for name in cfg.methods:
            m = Method.parse(name)
            if m.combined:
                continue
            onehot_ok &= np.array_equal(_nofc_by_hand(log_values, t, 1, m, cfg), got[name])
            checked += 1

    # rolling window at least as long as every training set equals expanding
    expanding = run_backtest(panel, cfg)
    rolling = run_backtest(panel, BacktestConfig(p=6, L=10, horizons=(1, 3), window="rolling", S=panel.T))
    rolling_ok = all(np.array_equal(expanding.forecasts[k], rolling.forecasts[k]) for k in expanding.forecasts)

    # perturbing data after the origin leaves the forecasts untouched
    rng = np.random.default_rng(55)
    lookahead_ok = True
    origins = sorted(int(t) for t in rng.choice(np.arange(60, 117), size=3, replace=False))
    for t in origins:
        mutated = log_values.copy()
        mutated[t:] += rng.normal(0, 5, mutated[t:].shape)
        for h in cfg.horizons:
            a, b = forecast_origin(log_values, t, h, cfg), forecast_origin(mutated, t, h, cfg)
            lookahead_ok &= all(np.array_equal(a[m], b[m]) for m in cfg.methods)

    passed = onehot_ok and rolling_ok and lookahead_ok
    detail = (
        f"one-hot == no-FC: {onehot_ok} ({checked} method-origin pairs); "
        f"rolling(S=T) == expanding: {rolling_ok}; no-lookahead at origins {origins}: {lookahead_ok}"
    )
    record(5, "backtest consistency", passed, detail)


# --------------------------------------------------------------------------
# 6. reproduction on the original data (conditional)

PUBLISHED_DESCRIPTIVES = {
    "AEX": (3.210, 0.901, 0.756, 3.242, 0.764),
    "CAC": (3.401, 0.843, 0.494, 3.056, 0.758),
    "DAX": (3.434, 0.870, 0.598, 3.102, 0.780),
    "DJIA": (2.760, 0.871, 0.878, 3.760, 0.745),
    "EUROSTOXX": (3.293, 0.821, 0.621, 3.383, 0.749),
    "FTSE": (2.864, 0.865, 0.681, 3.425, 0.770),
    "NASDAQ": (3.241, 0.959, 0.687, 2.640, 0.800),
    "NIKKEI": (3.361, 0.608, 0.357, 3.945, 0.659),
    "SMI": (2.882, 0.864, 0.928, 3.660, 0.727),
    "SP500": (2.776, 0.896, 0.773, 3.462, 0.767),
}
DATA_ENV = "SPARSEVAR_REAL_DATA"


def _real_data_path():
    path = os.environ.get(DATA_ENV)
    if path:
        return Path(path)
    default = Path(__file__).parent / "data" / "realized_variance.csv"
    return default if default.is_file() else None


def test_criterion_6_real_data():
    path = _real_data_path()
    if path is None:
        line = f"criterion 6 [SKIP] real-data reproduction: no data snapshot (set {DATA_ENV} to a wide date,index... CSV)"
        RESULTS.append(line)
        print(line, flush=True)
        pytest.skip(line)
    raw = ingest_csv(path, schema=list(PUBLISHED_DESCRIPTIVES))
    if raw.frequency == "daily":
        raw = aggregate_monthly(raw)
    panel = log_center(raw)
    keep = (panel.dates >= pd.Period("2000-01", "M")) & (panel.dates <= pd.Period("2016-04", "M"))
    panel = TimeSeriesPanel.from_log_values(panel.dates[keep], panel.uncentered()[keep], panel.names)
    table = descriptives(panel)
    expected = pd.DataFrame(PUBLISHED_DESCRIPTIVES, index=table.columns).T.loc[table.index]
    desc_gap = float((table - expected).abs().to_numpy().max())

    report = run_backtest(panel, BacktestConfig(threads=default_threads()))
    mafe_tab = report.mafe_table()
    by_est = {e: mafe_tab[[m for m in mafe_tab.columns if Method.parse(m).estimator == e]].mean(axis=1) for e in ("ols", *KINDS)}
    ordered_best = all(by_est["ordered"][h] <= min(v[h] for v in by_est.values()) for h in report.horizons)
    var = mafe_tab[[m for m in mafe_tab.columns if m.startswith("var_")]].mean(axis=1)
    ar = mafe_tab[[m for m in mafe_tab.columns if m.startswith("ar_")]].mean(axis=1)
    multi_h6 = bool(var[6] < ar[6])
    passed = panel.T == 196 and desc_gap <= 0.05 and ordered_best and multi_h6
    detail = f"T={panel.T}, max descriptive gap={desc_gap:.3f} (tol 0.05); ordered lowest MAFE at every h: {ordered_best}; VAR beats AR at h=6: {multi_h6}"
    record(6, "real-data descriptives and MAFE ordering", passed, detail)


# --------------------------------------------------------------------------
# 7. desk-scale end-to-end run


def test_criterion_7_end_to_end(tmp_path):
    panel = synthetic_panel(10, 196, seed=11)
    cfg = BacktestConfig(p=36, L=20, horizons=(1, 2, 3, 6), threads=default_threads())
    assert len(cfg.methods) == 16
    t0 = time.perf_counter()
    first = run_backtest(panel, cfg)
    elapsed = time.perf_counter() - t0
    first.write(tmp_path / "a")
    second = run_backtest(panel, cfg)
    second.write(tmp_path / "b")
    names = ("afe.csv", "mafe.csv", "audit.jsonl")
    identical = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names)
    passed = elapsed < 1800 and identical
    detail = (
        f"16 methods, q=10, T=196, p=36, L=20, h in (1,2,3,6): {elapsed / 60:.1f} min on {cfg.threads} "
        f"worker(s) (limit 30 min on 8 cores); rerun byte-identical: {identical}"
    )
    record(7, "desk-scale end-to-end backtest", passed, detail)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
