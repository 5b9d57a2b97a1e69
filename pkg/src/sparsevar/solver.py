"""Accelerated proximal gradient for one VAR equation at a time.

Each equation minimizes ``0.5 * ||y_eq - X beta||^2 + lam * penalty(beta)``.
Everything runs on the Gram matrix ``X'X``, so one iteration costs one
``(q*p)^2`` matrix-vector product whatever the sample size.

The ordered penalty is optimized in the lifted variables ``(beta_plus,
beta_minus)`` where its prox is two monotone projections (PAVA); the other two
penalties are optimized in ``beta`` directly.

Coefficients are not standardized before penalization.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .design import LagDesign
from .prox import (
    GroupLayout,
    PenaltyKind,
    _pava_nonneg_kernel,
    _prox_hier_kernel,
    _soft_kernel,
    ordered_split,
    penalty_value,
)

__all__ = [
    "SolverConfig",
    "SolveResult",
    "lipschitz_constant",
    "objective",
    "solve_equation",
    "solve_system",
]

logger = logging.getLogger(__name__)

FIXED = "fixed"
BACKTRACKING = "backtracking"


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 10_000
    tolerance: float = 1e-7
    objective_tolerance: float = 1e-10
    step_rule: str = FIXED
    warm_start: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.objective_tolerance < 0:
            raise ValueError("objective_tolerance must be >= 0")
        if self.step_rule not in (FIXED, BACKTRACKING):
            raise ValueError(f"step_rule must be {FIXED!r} or {BACKTRACKING!r}, got {self.step_rule!r}")


@dataclass
class SolveResult:
    beta: np.ndarray
    iterations: int
    converged: bool
    final_objective: float
    start_objective: float
    history: np.ndarray = field(repr=False)
    beta_plus: np.ndarray | None = field(default=None, repr=False)
    beta_minus: np.ndarray | None = field(default=None, repr=False)


def lipschitz_constant(gram: np.ndarray, steps: int = 50, tol: float = 1e-9) -> float:
    """Largest eigenvalue of ``gram`` by power iteration, inflated by 1%.

    Power iteration approaches the top eigenvalue from below; the margin keeps
    the fixed step ``1 / L`` on the safe side.
    """
    P = gram.shape[0]
    v = np.ones(P) / np.sqrt(P)
    est = 0.0
    for _ in range(steps):
        w = gram @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 1.0
        new = float(v @ w)
        v = w / nrm
        if abs(new - est) <= tol * max(abs(new), 1e-300):
            est = new
            break
        est = new
    # Rayleigh quotient of the final iterate is tighter than the norm ratio
    est = max(est, float(v @ (gram @ v)))
    return 1.01 * est


def objective(design: LagDesign, eq_index: int, beta, lam: float, kind, layout: GroupLayout | None = None) -> float:
    """Single-equation objective evaluated from residuals."""
    beta = np.asarray(beta, dtype=float)
    if layout is None:
        layout = GroupLayout(design.q, design.p)
    r = design.Y[:, eq_index] - design.X @ beta
    return 0.5 * float(r @ r) + lam * penalty_value(kind, beta, layout)


def _prepare(design: LagDesign):
    cached = design.__dict__.get("_lipschitz")
    if cached is None:
        cached = lipschitz_constant(design.gram)
        design.__dict__["_lipschitz"] = cached
    return design.gram, design.xty, design.yty, cached


def solve_equation(
    design: LagDesign,
    eq_index: int,
    lam: float,
    kind,
    config: SolverConfig | None = None,
) -> SolveResult:
    """Minimize the penalized least-squares objective of equation ``eq_index``.

    Non-convergence within ``max_iterations`` is reported through
    ``converged=False`` rather than raised.
    """
    config = config or SolverConfig()
    kind = PenaltyKind.parse(kind)
    if lam < 0 or not np.isfinite(lam):
        raise ValueError(f"sparsity parameter must be a finite nonnegative number, got {lam}")
    if not 0 <= eq_index < design.n_eq:
        raise IndexError(f"equation {eq_index} outside 0..{design.n_eq - 1}")
    if not (np.all(np.isfinite(design.X)) and np.all(np.isfinite(design.Y))):
        raise ValueError("design contains NaN or infinite values")

    G, C, yy, L = _prepare(design)
    P = G.shape[0]
    beta0 = np.zeros(P) if config.warm_start is None else np.asarray(config.warm_start, dtype=float).copy()
    if beta0.shape != (P,):
        raise ValueError(f"warm start must have length {P}, got shape {beta0.shape}")

    layout = GroupLayout(design.q, design.p)
    if kind is PenaltyKind.ORDERED:
        plus, minus = ordered_split(beta0, layout)
        w0 = np.concatenate([plus, minus])
    else:
        w0 = beta0
    if kind is PenaltyKind.ORDERED:
        # the lifted smooth part has Hessian [[G, -G], [-G, G]]
        L = 2.0 * L
    if config.step_rule == FIXED:
        L0, backtrack = L, False
    else:
        L0, backtrack = max(np.trace(G) / P, 1e-12), True

    w, iters, converged, hist = _fista(
        G,
        np.ascontiguousarray(C[:, eq_index]),
        float(yy[eq_index]),
        float(lam),
        kind.code,
        layout.q,
        layout.p,
        float(L0),
        backtrack,
        w0,
        config.max_iterations,
        config.tolerance,
        config.objective_tolerance,
    )
    if kind is PenaltyKind.ORDERED:
        plus, minus = w[:P], w[P:]
        beta = plus - minus
    else:
        beta, plus, minus = w, None, None
    if not converged:
        logger.debug("equation %d, %s, lam=%.4g: no convergence after %d iterations", eq_index, kind.value, lam, iters)
    # true objective of beta; for the ordered penalty this can sit below the lifted value
    final = 0.5 * float(yy[eq_index]) - float(C[:, eq_index] @ beta) + 0.5 * float(beta @ (G @ beta))
    final += lam * penalty_value(kind, beta, layout)
    return SolveResult(
        beta=beta,
        iterations=int(iters),
        converged=bool(converged),
        final_objective=min(final, float(hist[-1])),
        start_objective=float(hist[0]),
        history=hist,
        beta_plus=plus,
        beta_minus=minus,
    )


def solve_system(design: LagDesign, lam: float, kind, config: SolverConfig | None = None):
    """Solve every equation independently and stack into a CoefTensor.

    ``config.warm_start`` may be a (n_eq, q*p) matrix with one row per equation.
    """
    from .estimators import CoefTensor

    config = config or SolverConfig()
    kind = PenaltyKind.parse(kind)
    warm = config.warm_start
    if warm is not None:
        warm = np.asarray(warm, dtype=float).reshape(design.n_eq, -1)
    rows, plus_rows, minus_rows, results = [], [], [], []
    for i in range(design.n_eq):
        cfg = config if warm is None else _with_warm(config, warm[i])
        res = solve_equation(design, i, lam, kind, cfg)
        results.append(res)
        rows.append(res.beta)
        if res.beta_plus is not None:
            plus_rows.append(res.beta_plus)
            minus_rows.append(res.beta_minus)
    shape = (design.n_eq, design.q, design.p)
    parts = None
    if plus_rows:
        parts = (np.stack(plus_rows).reshape(shape), np.stack(minus_rows).reshape(shape))
    return CoefTensor(
        beta=np.stack(rows).reshape(shape),
        kind=kind.value,
        lam=float(lam),
        parts=parts,
        series=design.series,
        converged=all(r.converged for r in results),
        iterations=sum(r.iterations for r in results),
    )


def _with_warm(config: SolverConfig, beta) -> SolverConfig:
    return SolverConfig(
        max_iterations=config.max_iterations,
        tolerance=config.tolerance,
        objective_tolerance=config.objective_tolerance,
        step_rule=config.step_rule,
        warm_start=beta,
    )


# --------------------------------------------------------------------------
# kernel


@njit(cache=True)
def _lift(w, kind, P, out):
    # beta = w for lasso/hierarchical, beta = w[:P] - w[P:] for ordered
    if kind == 2:
        for i in range(P):
            out[i] = w[i] - w[P + i]
    else:
        for i in range(P):
            out[i] = w[i]


@njit(cache=True)
def _penalty(w, kind, q, p):
    P = q * p
    if kind == 0:
        s = 0.0
        for i in range(P):
            s += abs(w[i])
        return s
    if kind == 2:
        s = 0.0
        for i in range(2 * P):
            s += w[i]
        return s
    s = 0.0
    for j in range(q):
        ssq = 0.0
        for l in range(p - 1, -1, -1):
            ssq += w[j * p + l] ** 2
            s += np.sqrt(ssq)
    return s


@njit(cache=True)
def _smooth(beta, Gb, c, yy):
    return 0.5 * yy - np.dot(c, beta) + 0.5 * np.dot(beta, Gb)


@njit(cache=True)
def _prox(z, t, kind, q, p, out):
    if kind == 0:
        _soft_kernel(z, t, out)
    elif kind == 1:
        _prox_hier_kernel(z, t, q, p, out)
    else:
        for j in range(2 * q):
            off = j * p
            for i in range(p):
                z[off + i] -= t
            _pava_nonneg_kernel(z, off, p, out)


@njit(cache=True)
def _fista(G, c, yy, lam, kind, q, p, L, backtrack, w0, max_iter, tol, obj_tol):
    P = q * p
    m = w0.shape[0]
    x = w0.copy()
    bx = np.empty(P)
    _lift(x, kind, P, bx)
    Gx = G @ bx
    Fx = _smooth(bx, Gx, c, yy) + lam * _penalty(x, kind, q, p)
    hist = np.empty(max_iter + 1)
    hist[0] = Fx
    n_acc = 0

    y = x.copy()
    Gy = Gx.copy()
    by = bx.copy()
    theta = 1.0
    z = np.empty(m)
    xn = np.empty(m)
    bn = np.empty(P)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        grad_b = Gy - c
        fy = 0.0
        if backtrack:
            fy = _smooth(by, Gy, c, yy)
        while True:
            step = 1.0 / L
            if kind == 2:
                for i in range(P):
                    z[i] = y[i] - step * grad_b[i]
                    z[P + i] = y[P + i] + step * grad_b[i]
            else:
                for i in range(P):
                    z[i] = y[i] - step * grad_b[i]
            _prox(z, lam * step, kind, q, p, xn)
            _lift(xn, kind, P, bn)
            Gn = G @ bn
            fn = _smooth(bn, Gn, c, yy)
            if not backtrack:
                break
            # sufficient decrease of the smooth part along the lifted step
            diff2 = 0.0
            for i in range(m):
                diff2 += (xn[i] - y[i]) ** 2
            lin = 0.0
            for i in range(P):
                lin += grad_b[i] * (bn[i] - by[i])
            if fn <= fy + lin + 0.5 * L * diff2 + 1e-12 * abs(fy):
                break
            L *= 2.0
        Fn = fn + lam * _penalty(xn, kind, q, p)

        if Fn > Fx:
            if theta == 1.0:
                if Fn - Fx <= 1e-13 * max(abs(Fx), 1e-300):
                    # a plain step from the accepted point cannot descend: rounding floor
                    converged = True
                    break
                # the step was too long for this curvature
                L *= 2.0
                continue
            # momentum overshoot: restart from the last accepted point
            theta = 1.0
            y[:] = x
            Gy[:] = Gx
            by[:] = bx
            continue

        dmax = 0.0
        bmax = 0.0
        for i in range(P):
            d = abs(bn[i] - bx[i])
            if d > dmax:
                dmax = d
            a = abs(bn[i])
            if a > bmax:
                bmax = a
        dF = Fx - Fn
        theta_n = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        mom = (theta - 1.0) / theta_n
        for i in range(m):
            y[i] = xn[i] + mom * (xn[i] - x[i])
        for i in range(P):
            Gy[i] = (1.0 + mom) * Gn[i] - mom * Gx[i]
            by[i] = (1.0 + mom) * bn[i] - mom * bx[i]
        x[:] = xn
        bx[:] = bn
        Gx[:] = Gn
        Fx = Fn
        theta = theta_n
        n_acc += 1
        hist[n_acc] = Fx
        if dmax <= tol * max(bmax, 1e-12) or dF <= obj_tol * max(abs(Fx), 1e-300):
            converged = True
            break
    return x, it, converged, hist[: n_acc + 1].copy()
