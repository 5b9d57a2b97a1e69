"""Synthetic panels from sparse VAR processes with known coefficients."""
from __future__ import annotations

import numpy as np

__all__ = ["companion", "spectral_radius", "simulate_var", "ar_coefs", "diagonal_var"]


def companion(coefs: np.ndarray) -> np.ndarray:
    """Companion matrix of ``coefs[i, j, l - 1]`` (equation, series, lag)."""
    coefs = np.asarray(coefs, dtype=float)
    q, _, p = coefs.shape
    top = np.concatenate([coefs[:, :, l] for l in range(p)], axis=1)
    if p == 1:
        return top
    lower = np.eye(q * (p - 1), q * p)
    return np.vstack([top, lower])


def spectral_radius(coefs) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(companion(coefs)))))


def ar_coefs(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    return phi.reshape(1, 1, -1)


def diagonal_var(phi, q: int) -> np.ndarray:
    """Each of ``q`` series follows its own AR with coefficients ``phi``; no spillovers."""
    phi = np.asarray(phi, dtype=float)
    coefs = np.zeros((q, q, phi.size))
    for i in range(q):
        coefs[i, i] = phi
    return coefs


def simulate_var(coefs, T: int, seed: int, noise: float = 1.0, level=0.0, burn: int = 200) -> np.ndarray:
    """Draw ``T`` observations (T, q) of a stable VAR with Gaussian innovations.

    ``level`` is added after simulation so the output can mimic log realized
    variances around a nonzero mean.
    """
    coefs = np.asarray(coefs, dtype=float)
    if coefs.ndim != 3 or coefs.shape[0] != coefs.shape[1]:
        raise ValueError(f"coefficients must have shape (q, q, p), got {coefs.shape}")
    if T < 1:
        raise ValueError("T must be positive")
    rho = spectral_radius(coefs)
    if rho >= 1.0:
        raise ValueError(f"unstable coefficients: spectral radius {rho:.4f} >= 1")
    q, _, p = coefs.shape
    rng = np.random.default_rng(seed)
    n = T + burn
    eps = rng.standard_normal((n, q)) * noise
    y = np.zeros((n + p, q))
    for t in range(p, n + p):
        acc = eps[t - p].copy()
        for l in range(1, p + 1):
            acc += coefs[:, :, l - 1] @ y[t - l]
        y[t] = acc
    return y[p + burn :] + np.asarray(level, dtype=float)
