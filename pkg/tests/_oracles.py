"""Independent reference solutions used by the test suite.

Nothing here calls into the package's optimization code: the prox oracle is a
zoom grid search on the objective, and the regression oracle states each
penalized problem directly in cvxpy.
"""
from __future__ import annotations

import itertools

import cvxpy as cp
import numpy as np


def penalty_batch(kind: str, B: np.ndarray, q: int, p: int) -> np.ndarray:
    """Penalty of every row of ``B`` (m, q*p); ordered uses ``sum_k k |b_k - b_{k+1}|``."""
    blocks = B.reshape(B.shape[0], q, p)
    if kind == "lasso":
        return np.abs(B).sum(axis=1)
    if kind == "hierarchical":
        ssq = np.cumsum((blocks**2)[:, :, ::-1], axis=2)
        return np.sqrt(ssq).sum(axis=(1, 2))
    padded = np.concatenate([blocks, np.zeros((B.shape[0], q, 1))], axis=2)
    d = np.abs(padded[:, :, :-1] - padded[:, :, 1:])
    return (d * np.arange(1, p + 1)).sum(axis=(1, 2))


def brute_force_prox(kind: str, z, t: float, q: int = 1, p: int | None = None, points: int = 13, width_tol: float = 1e-8):
    """Minimize ``0.5 ||b - z||^2 + t * penalty(b)`` by repeated grid refinement.

    Each round evaluates a full tensor grid around the incumbent and halves the
    window, which keeps three grid spacings of margin around the incumbent.
    """
    z = np.asarray(z, dtype=float)
    p = z.size // q if p is None else p
    center = np.zeros_like(z)
    half = float(np.abs(z).max()) + 1.0
    axis = np.linspace(-1.0, 1.0, points)
    offsets = np.array(list(itertools.product(axis, repeat=z.size)))
    while half > width_tol:
        B = center + half * offsets
        F = 0.5 * ((B - z) ** 2).sum(axis=1) + t * penalty_batch(kind, B, q, p)
        center = B[np.argmin(F)]
        half *= 0.5
    return center


def split_lp_penalty(beta, q: int, p: int) -> float:
    """Ordered penalty from its definition: cheapest monotone nonnegative split, as an LP."""
    beta = np.asarray(beta, dtype=float)
    plus, minus = cp.Variable(q * p), cp.Variable(q * p)
    cons = [plus - minus == beta]
    cons += _monotone(plus, q, p) + _monotone(minus, q, p)
    prob = cp.Problem(cp.Minimize(cp.sum(plus + minus)), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return float(prob.value)


def _monotone(v, q, p):
    cons = []
    for j in range(q):
        blk = v[j * p : (j + 1) * p]
        cons.append(blk[p - 1] >= 0)
        if p > 1:
            cons.append(blk[:-1] >= blk[1:])
    return cons


def regression_oracle(X, y, lam: float, kind: str, q: int, p: int):
    """High-precision minimizer and minimum of ``0.5 ||y - X b||^2 + lam * penalty(b)``.

    The ordered penalty is written in its lifted form so the oracle never uses a
    closed-form penalty.
    """
    P = X.shape[1]
    beta = cp.Variable(P)
    loss = 0.5 * cp.sum_squares(y - X @ beta)
    cons = []
    if kind == "lasso":
        pen = cp.norm1(beta)
    elif kind == "hierarchical":
        pen = sum(cp.norm(beta[j * p + l : (j + 1) * p], 2) for j in range(q) for l in range(p))
    else:
        plus, minus = cp.Variable(P), cp.Variable(P)
        cons = [beta == plus - minus] + _monotone(plus, q, p) + _monotone(minus, q, p)
        pen = cp.sum(plus + minus)
    prob = cp.Problem(cp.Minimize(loss + lam * pen), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12, max_iter=500)
    return np.asarray(beta.value), float(prob.value)


def random_design(rng, n: int, q: int, p: int, noise: float = 0.5):
    """Random regression problem with a sparse, lag-decaying truth."""
    X = rng.standard_normal((n, q * p))
    truth = np.zeros(q * p)
    for j in range(q):
        k = rng.integers(0, p + 1)
        truth[j * p : j * p + k] = rng.normal(0, 1, k) / np.arange(1, k + 1)
    y = X @ truth + noise * rng.standard_normal(n)
    return X, y
