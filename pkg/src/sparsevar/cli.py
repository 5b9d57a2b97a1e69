"""Command-line entry point: ``ingest``, ``fit``, ``backtest`` and ``simulate``.

Every flag can also be set through an environment variable named
``SPARSEVAR_<FLAG>`` (upper case, dashes as underscores), and ``--config``
replays the ``config.json`` snapshot a previous run wrote. Precedence, lowest
first: built-in default, environment, snapshot, command line.

Exit codes: 0 success, 1 computation failure, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .backtest import (
    EXPANDING,
    ROLLING,
    BacktestConfig,
    all_methods,
    default_threads,
    run_backtest,
    subperiod_mafe,
)
from .combine import WeightScheme, build_grid, combined_lag_lengths, select_by_bic, weights
from .data import (
    DAILY,
    MONTHLY,
    DataError,
    TimeSeriesPanel,
    aggregate_monthly,
    descriptives,
    ingest_csv,
    log_center,
    read_panel,
    write_panel,
)
from .design import build_design
from .estimators import ZERO_TOL, coef_frame, fit_path, lag_lengths
from .prox import PenaltyKind
from .simulate import diagonal_var, simulate_var, spectral_radius
from .solver import SolverConfig

logger = logging.getLogger("sparsevar")

ENV_PREFIX = "SPARSEVAR_"
PENALIZED = tuple(k.value for k in PenaltyKind)
EXIT_OK, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad flags or inputs detected before any computation starts."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _str_list(text: str) -> tuple:
    return tuple(v.strip() for v in str(text).split(",") if v.strip())


def _subperiod(text: str) -> tuple:
    parts = str(text).split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"subperiod must look like 2008-01:2009-12, got {text!r}")
    try:
        return tuple(str(pd.Period(v, freq="M")) for v in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad month in subperiod {text!r}") from None


def _common(sub: argparse.ArgumentParser, needs_panel: bool = True) -> None:
    if needs_panel:
        sub.add_argument("--panel", required=True, help="directory holding panel.csv and means.csv")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--config", help="config.json snapshot of an earlier run to replay")
    sub.add_argument("-v", "--verbose", action="store_true")


def _model_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--p", type=int, default=36, help="maximal lag (default 36)")
    sub.add_argument("--L", type=int, default=20, help="grid length (default 20)")
    sub.add_argument("--scheme", choices=[s.value for s in WeightScheme], default="bic")
    sub.add_argument("--inner-floor", type=float, default=1e-3, help="smallest nonzero grid value relative to the top")
    sub.add_argument("--zero-tol", type=float, default=ZERO_TOL)
    sub.add_argument("--max-iterations", type=int, default=SolverConfig.max_iterations)
    sub.add_argument("--tolerance", type=float, default=SolverConfig.tolerance)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparsevar", description="Sparse AR/VAR forecasting of log realized variances.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ing = subs.add_parser("ingest", help="read realized variances, aggregate to months, log and center")
    ing.add_argument("--input", required=True, help="CSV with a date column followed by one column per index")
    ing.add_argument("--frequency", choices=["auto", DAILY, MONTHLY], default="auto",
                     help="monthly input skips aggregation; auto infers it from the date format")
    ing.add_argument("--columns", type=_str_list, default=None, help="comma-separated subset and order of columns")
    _common(ing, needs_panel=False)

    fit = subs.add_parser("fit", help="full-sample fits: grid statistics, lag lengths and lag matrices")
    fit.add_argument("--model", choices=["ar", "var"], default="var")
    fit.add_argument("--estimator", choices=[*PENALIZED, "all"], default="all")
    _model_flags(fit)
    _common(fit)

    bt = subs.add_parser("backtest", help="out-of-sample AFE and MAFE tables")
    bt.add_argument("--horizons", type=_int_list, default=(1, 2, 3, 6))
    bt.add_argument("--window", choices=[EXPANDING, ROLLING], default=EXPANDING)
    bt.add_argument("--S", type=int, default=None, help="rolling window size (default floor(T/2))")
    bt.add_argument("--start", type=int, default=None, help="first forecast origin (default floor(T/2))")
    bt.add_argument("--methods", type=_str_list, default=("all",), help="comma-separated names such as var_ordered_fc, or all")
    bt.add_argument("--threads", type=int, default=default_threads())
    bt.add_argument("--subperiod", type=_subperiod, default=None, help="also tabulate MAFE for targets in START:END")
    _model_flags(bt)
    _common(bt)

    sim = subs.add_parser("simulate", help="synthetic panel from a sparse VAR with stored truth")
    sim.add_argument("--q", type=int, default=1, help="number of series")
    sim.add_argument("--T", type=int, default=300)
    sim.add_argument("--phi", type=_float_list, default=(0.5, 0.3), help="own-lag coefficients shared by every series")
    sim.add_argument("--spill", action="append", default=None, metavar="I,J,L,VALUE",
                     help="extra coefficient of series J at lag L in equation I (0-based I and J); repeatable")
    sim.add_argument("--noise", type=float, default=1.0)
    sim.add_argument("--level", type=float, default=0.0, help="mean added to every simulated series")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--start-month", default="2000-01")
    _common(sim, needs_panel=False)
    return parser


def _subparsers(parser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    return {}


def _apply_env(parser) -> None:
    """String defaults from ``SPARSEVAR_*``; argparse runs them through each flag's type."""
    for sub in _subparsers(parser).values():
        for action in sub._actions:
            if not action.option_strings or action.dest in ("help", "config"):
                continue
            key = ENV_PREFIX + action.dest.upper()
            if key in os.environ:
                value = os.environ[key]
                if isinstance(action, argparse._StoreTrueAction):
                    value = value.strip().lower() in ("1", "true", "yes", "on")
                elif isinstance(action, argparse._AppendAction):
                    value = [v for v in value.split(";") if v]
                action.default = value
                action.required = False


def _apply_snapshot(parser, command: str, path: str) -> None:
    snap_path = Path(path)
    if not snap_path.is_file():
        raise UsageError(f"config snapshot not found: {snap_path}")
    try:
        snap = json.loads(snap_path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config snapshot {snap_path} is not valid JSON: {exc}") from None
    if snap.get("command") != command:
        raise UsageError(f"snapshot {snap_path} records command {snap.get('command')!r}, not {command!r}")
    sub = _subparsers(parser)[command]
    for action in sub._actions:
        if action.dest in snap.get("args", {}) and action.dest not in ("config", "out"):
            value = snap["args"][action.dest]
            action.default = tuple(value) if isinstance(value, list) and action.type in (_int_list, _float_list, _str_list, _subperiod) else value
            action.required = False


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    _apply_env(parser)
    probe = parser.parse_args(argv)
    if probe.config:
        _apply_snapshot(parser, probe.command, probe.config)
        return parser.parse_args(argv)
    return probe


def _snapshot(args: argparse.Namespace) -> dict:
    skip = {"command", "config", "out", "verbose", "threads"}
    return {
        "command": args.command,
        "version": __version__,
        "args": {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vars(args).items()) if k not in skip},
    }


def _write_config(args, out: Path, extra: dict | None = None) -> None:
    snap = _snapshot(args)
    if extra:
        snap.update(extra)
    (out / "config.json").write_text(json.dumps(snap, indent=2, sort_keys=True) + "\n")


def _load_panel(args) -> TimeSeriesPanel:
    try:
        return read_panel(args.panel)
    except (FileNotFoundError, DataError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def cmd_ingest(args) -> int:
    try:
        raw = ingest_csv(args.input, schema=list(args.columns) if args.columns else None)
        if args.frequency != "auto" and raw.frequency != args.frequency:
            raise DataError(f"--frequency {args.frequency} but {args.input} holds {raw.frequency} dates")
        monthly = aggregate_monthly(raw) if raw.frequency == DAILY else raw
        panel = log_center(monthly)
        table = descriptives(panel)
    except (FileNotFoundError, DataError) as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    write_panel(panel, out)
    table.to_csv(out / "descriptives.csv", float_format="%.12g")
    _write_config(args, out, {"rows_dropped": raw.dropped, "months": panel.T})
    logger.info("ingested %d months of %d series into %s", panel.T, panel.q, out)
    return EXIT_OK


def _solver_config(args) -> SolverConfig:
    return SolverConfig(max_iterations=args.max_iterations, tolerance=args.tolerance)


def _check_model_flags(args) -> None:
    if args.p < 1:
        raise UsageError(f"--p must be >= 1, got {args.p}")
    if args.L < 2:
        raise UsageError(f"--L must be >= 2, got {args.L}")
    if not 0 < args.inner_floor < 1:
        raise UsageError(f"--inner-floor must lie in (0, 1), got {args.inner_floor}")


def _fit_one(values, p, kind, args, subset=None):
    design = build_design(values, p, 1, subset=subset)
    grid = build_grid(design, kind, args.L, args.inner_floor)
    path = fit_path(design, kind, grid, _solver_config(args), args.zero_tol)
    w = weights(path.stats, args.scheme)
    combined = combined_lag_lengths([lag_lengths(f, args.zero_tol) for f in path.fits], w)
    return path, w, combined


def _path_table(path, w, label=None) -> pd.DataFrame:
    best = select_by_bic(path.stats)
    frame = pd.DataFrame(
        {
            "point": np.arange(len(path)),
            "lambda": path.grid,
            "loss": path.losses,
            "df": path.dfs,
            "bic": path.bics,
            "weight": w,
            "selected": np.arange(len(path)) == best,
        }
    )
    if label is not None:
        frame.insert(0, "index", label)
    return frame


def cmd_fit(args) -> int:
    _check_model_flags(args)
    panel = _load_panel(args)
    if panel.T < args.p + 2:
        raise UsageError(f"panel has {panel.T} months; --p {args.p} needs at least {args.p + 2}")
    kinds = PENALIZED if args.estimator == "all" else (args.estimator,)
    names = list(panel.names)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.model == "ar":
        table = pd.DataFrame(index=pd.Index(names, name="index"))
        for kind in kinds:
            paths, coefs = [], []
            for i, name in enumerate(names):
                path, w, combined = _fit_one(panel.values, args.p, kind, args, subset=i)
                table.loc[name, f"{kind}_p_hat"] = float(combined.p_hat[0, 0])
                table.loc[name, f"{kind}_bic"] = float(np.nanmin(path.bics))
                paths.append(_path_table(path, w, name))
                coefs.append(coef_frame(path, names))
            pd.concat(paths).to_csv(out / f"path_ar_{kind}.csv", index=False, float_format="%.12g")
            pd.concat(coefs).to_csv(out / f"coef_ar_{kind}.csv", index=False, float_format="%.12g")
        table.to_csv(out / "lag_lengths.csv", float_format="%.12g")
    else:
        rows = []
        for kind in kinds:
            path, w, combined = _fit_one(panel.values, args.p, kind, args)
            _path_table(path, w).to_csv(out / f"path_var_{kind}.csv", index=False, float_format="%.12g")
            coef_frame(path, names).to_csv(out / f"coef_var_{kind}.csv", index=False, float_format="%.12g")
            matrix = pd.DataFrame(combined.p_hat, index=pd.Index(names, name="equation"), columns=names)
            matrix.to_csv(out / f"lag_matrix_{kind}.csv", float_format="%.12g")
            rows.append(
                {
                    "estimator": kind,
                    "bic": float(np.nanmin(path.bics)),
                    "mean_p_hat": float(combined.p_hat.mean()),
                    "own_mean_p_hat": float(np.diag(combined.p_hat).mean()),
                }
            )
        pd.DataFrame(rows).set_index("estimator").to_csv(out / "lag_lengths.csv", float_format="%.12g")
    _write_config(args, out)
    return EXIT_OK


def cmd_backtest(args) -> int:
    _check_model_flags(args)
    panel = _load_panel(args)
    methods = all_methods() if tuple(args.methods) == ("all",) else tuple(args.methods)
    S = args.S
    if args.window == ROLLING and S is None:
        S = panel.T // 2
    try:
        config = BacktestConfig(
            horizons=tuple(args.horizons),
            window=args.window,
            S=S,
            start=args.start,
            p=args.p,
            L=args.L,
            scheme=args.scheme,
            methods=methods,
            inner_floor=args.inner_floor,
            zero_tol=args.zero_tol,
            solver=_solver_config(args),
            threads=max(1, args.threads),
        )
        config.validate(panel.T)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = run_backtest(panel, config, progress=args.verbose)
    out = Path(args.out)
    report.write(out)
    if args.subperiod:
        subperiod_mafe(report, *args.subperiod).to_csv(out / "mafe_subperiod.csv", float_format="%.12g")
    _write_config(args, out, {"backtest": {k: v for k, v in config.snapshot().items() if k != "threads"}})
    return EXIT_OK


def _truth(args) -> np.ndarray:
    if args.q < 1 or args.T < 1:
        raise UsageError("--q and --T must be positive")
    if not args.phi:
        raise UsageError("--phi needs at least one coefficient")
    coefs = diagonal_var(args.phi, args.q)
    for entry in args.spill or ():
        try:
            i, j, l, value = entry.split(",")
            i, j, l, value = int(i), int(j), int(l), float(value)
        except ValueError:
            raise UsageError(f"--spill expects I,J,L,VALUE, got {entry!r}") from None
        if not (0 <= i < args.q and 0 <= j < args.q and l >= 1):
            raise UsageError(f"--spill {entry!r} is outside a {args.q}-series system")
        if l > coefs.shape[2]:
            coefs = np.concatenate([coefs, np.zeros((args.q, args.q, l - coefs.shape[2]))], axis=2)
        coefs[i, j, l - 1] = value
    rho = spectral_radius(coefs)
    if rho >= 1.0:
        raise UsageError(f"unstable coefficients: spectral radius {rho:.4f} >= 1")
    return coefs


def cmd_simulate(args) -> int:
    coefs = _truth(args)
    try:
        start = pd.Period(args.start_month, freq="M")
    except ValueError:
        raise UsageError(f"bad --start-month {args.start_month!r}") from None
    values = simulate_var(coefs, args.T, seed=args.seed, noise=args.noise, level=args.level)
    names = [f"s{i + 1}" for i in range(args.q)]
    panel = TimeSeriesPanel.from_log_values(pd.period_range(start, periods=args.T, freq="M"), values, names)
    out = Path(args.out)
    write_panel(panel, out)
    q, _, p = coefs.shape
    truth = pd.DataFrame(
        [(names[i], names[j], l + 1, coefs[i, j, l]) for i in range(q) for j in range(q) for l in range(p)],
        columns=["equation", "series", "lag", "beta"],
    )
    truth.to_csv(out / "truth.csv", index=False)
    _write_config(args, out, {"spectral_radius": spectral_radius(coefs)})
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "fit": cmd_fit, "backtest": cmd_backtest, "simulate": cmd_simulate}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        logger.debug("computation failed", exc_info=True)
        print(f"error: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
