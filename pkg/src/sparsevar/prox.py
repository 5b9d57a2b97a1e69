"""Proximal operators, penalty values and zero-thresholds for the three lag penalties.

Coefficient vectors follow the design column order: series-major, lag-minor,
so ``beta[j * p + (l - 1)]`` is the coefficient of series ``j`` at lag ``l``.
Every penalty acts block-wise on the ``p`` lags of one series.

The numba kernels at the bottom are shared with :mod:`sparsevar.solver`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import lsq_linear

__all__ = [
    "PenaltyKind",
    "GroupLayout",
    "penalty_value",
    "ordered_split",
    "prox_lasso",
    "prox_hierarchical",
    "prox_ordered",
    "prox_ordered_parts",
    "project_monotone_nonneg",
    "lambda_max",
]

# relative slack for "norm equals threshold" ties; keeps the top of the grid exactly zero
_TIE_EPS = 4.0 * np.finfo(float).eps


class PenaltyKind(str, enum.Enum):
    LASSO = "lasso"
    HIERARCHICAL = "hierarchical"
    ORDERED = "ordered"

    @property
    def code(self) -> int:
        return _KIND_CODES[self]

    @classmethod
    def parse(cls, value: "str | PenaltyKind") -> "PenaltyKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown penalty {value!r}; expected one of {names}") from None


_KIND_CODES = {PenaltyKind.LASSO: 0, PenaltyKind.HIERARCHICAL: 1, PenaltyKind.ORDERED: 2}


@dataclass(frozen=True)
class GroupLayout:
    """Block structure of a coefficient vector: ``q`` series with ``p`` lags each.

    The hierarchical groups of series ``j`` are the lag suffixes
    ``{l, ..., p}`` for ``l = 1..p``; ``group(j, l + 1)`` is nested in ``group(j, l)``.
    """

    q: int
    p: int

    def __post_init__(self):
        if self.q < 1 or self.p < 1:
            raise ValueError(f"layout needs q >= 1 and p >= 1, got q={self.q}, p={self.p}")

    @property
    def size(self) -> int:
        return self.q * self.p

    def block(self, j: int) -> slice:
        return slice(j * self.p, (j + 1) * self.p)

    def group(self, j: int, l: int) -> np.ndarray:
        """Positions of the suffix group starting at lag ``l`` (1-based) of series ``j``."""
        if not 1 <= l <= self.p:
            raise IndexError(f"lag {l} outside 1..{self.p}")
        return np.arange(j * self.p + l - 1, (j + 1) * self.p)

    def groups(self):
        for j in range(self.q):
            for l in range(1, self.p + 1):
                yield j, l, self.group(j, l)

    def check(self, beta: np.ndarray) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        if beta.ndim != 1 or beta.shape[0] != self.size:
            raise ValueError(f"expected a vector of length {self.size}, got shape {beta.shape}")
        return beta


def _layout_for(beta: np.ndarray, layout: GroupLayout | None) -> GroupLayout:
    if layout is None:
        return GroupLayout(1, beta.shape[0])
    return layout


def ordered_split(beta, layout: GroupLayout | None = None):
    """Cheapest monotone split ``beta = beta_plus - beta_minus``.

    Both parts are nonnegative and non-increasing in the lag within every block,
    and ``sum(beta_plus + beta_minus)`` is minimal among all such splits. Writing
    ``d_k = beta_k - beta_{k+1}`` (with ``beta_{p+1} = 0``), the parts are the
    suffix sums of the positive and negative parts of ``d``.
    """
    beta = np.asarray(beta, dtype=float)
    layout = _layout_for(beta, layout)
    beta = layout.check(beta)
    blocks = beta.reshape(layout.q, layout.p)
    d = blocks - np.concatenate([blocks[:, 1:], np.zeros((layout.q, 1))], axis=1)
    plus = np.cumsum(np.maximum(d, 0.0)[:, ::-1], axis=1)[:, ::-1]
    minus = np.cumsum(np.maximum(-d, 0.0)[:, ::-1], axis=1)[:, ::-1]
    return plus.ravel(), minus.ravel()


def penalty_value(kind, beta, layout: GroupLayout | None = None) -> float:
    """Penalty at unit sparsity parameter.

    For the ordered penalty this is ``sum(beta_plus + beta_minus)`` at the
    cheapest feasible split, which equals ``sum_k k * |beta_k - beta_{k+1}|``
    per block. It equals the l1 norm only when the positive and negative parts
    of ``beta`` are themselves non-increasing; ``(1, -1)`` costs 4, not 2.
    """
    kind = PenaltyKind.parse(kind)
    beta = np.asarray(beta, dtype=float)
    layout = _layout_for(beta, layout)
    beta = layout.check(beta)
    if kind is PenaltyKind.LASSO:
        return float(np.abs(beta).sum())
    blocks = beta.reshape(layout.q, layout.p)
    if kind is PenaltyKind.HIERARCHICAL:
        # suffix sums of squares give every nested group norm at once
        ssq = np.cumsum((blocks**2)[:, ::-1], axis=1)
        return float(np.sqrt(ssq).sum())
    plus, minus = ordered_split(beta, layout)
    return float(plus.sum() + minus.sum())


def prox_lasso(z, t: float) -> np.ndarray:
    """Elementwise soft-thresholding."""
    if t < 0:
        raise ValueError(f"threshold must be nonnegative, got {t}")
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def prox_hierarchical(z, t: float, layout: GroupLayout | None = None) -> np.ndarray:
    """Prox of ``t * sum of nested suffix-group norms``.

    One pass per block from the innermost group ``{p}`` out to ``{1..p}``,
    each applying group soft-scaling to the current suffix. For tree-structured
    groups this composition is the exact prox.
    """
    if t < 0:
        raise ValueError(f"threshold must be nonnegative, got {t}")
    z = np.asarray(z, dtype=float)
    layout = _layout_for(z, layout)
    z = layout.check(z)
    out = np.empty_like(z)
    _prox_hier_kernel(z, t, layout.q, layout.p, out)
    return out


def project_monotone_nonneg(v) -> np.ndarray:
    """Euclidean projection onto ``{x : x_1 >= x_2 >= ... >= x_p >= 0}`` via PAVA."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    _pava_nonneg_kernel(v, 0, v.shape[0], out)
    return out


def prox_ordered_parts(u_plus, u_minus, t: float, layout: GroupLayout | None = None):
    """Prox of the ordered penalty in the lifted ``(beta_plus, beta_minus)`` space.

    The lifted penalty ``t * sum(beta_plus + beta_minus)`` plus the two cone
    constraints is separable, so each part is a monotone-nonnegative projection
    of its shifted argument. This is the step the solver takes; it is *not*
    the prox in ``beta`` space (see :func:`prox_ordered`).
    """
    if t < 0:
        raise ValueError(f"threshold must be nonnegative, got {t}")
    u_plus = np.asarray(u_plus, dtype=float)
    u_minus = np.asarray(u_minus, dtype=float)
    layout = _layout_for(u_plus, layout)
    layout.check(u_plus)
    layout.check(u_minus)
    plus = np.empty_like(u_plus)
    minus = np.empty_like(u_minus)
    for j in range(layout.q):
        lo, hi = j * layout.p, (j + 1) * layout.p
        _pava_nonneg_kernel(u_plus[lo:hi] - t, 0, layout.p, plus[lo:hi])
        _pava_nonneg_kernel(u_minus[lo:hi] - t, 0, layout.p, minus[lo:hi])
    return plus, minus


def prox_ordered(z, t: float, layout: GroupLayout | None = None):
    """Exact prox of the ordered penalty in ``beta`` space.

    Minimizes ``0.5 * ||beta - z||^2 + t * sum(beta_plus + beta_minus)`` over
    ``beta`` and monotone nonnegative splits. Per block this is a weighted
    total-variation problem with weights ``t * k`` on ``beta_k - beta_{k+1}``;
    it is solved through its box-constrained dual with bounded-variable least
    squares, which terminates at the exact active set.

    Returns ``(beta, beta_plus, beta_minus)`` with the cheapest split.
    """
    if t < 0:
        raise ValueError(f"threshold must be nonnegative, got {t}")
    z = np.asarray(z, dtype=float)
    layout = _layout_for(z, layout)
    z = layout.check(z)
    p = layout.p
    if t == 0:
        beta = z.copy()
    else:
        # D beta = (beta_1 - beta_2, ..., beta_{p-1} - beta_p, beta_p)
        D = np.eye(p) - np.eye(p, k=1)
        w = t * np.arange(1, p + 1, dtype=float)
        beta = np.empty_like(z)
        for j in range(layout.q):
            zb = z[layout.block(j)]
            res = lsq_linear(D.T, zb, bounds=(-w, w), method="bvls", tol=1e-14)
            beta[layout.block(j)] = zb - D.T @ res.x
        # dual solution sits on its box to rounding; snap the resulting dust
        beta[np.abs(beta) <= 1e-12 * max(1.0, float(np.abs(z).max()))] = 0.0
    plus, minus = ordered_split(beta, layout)
    return beta, plus, minus


def lambda_max(kind, design, layout: GroupLayout | None = None) -> float:
    """Sparsity parameter at which the fit is entirely zero.

    Lasso: ``max |x_col' y_eq|``, the exact threshold for the half-scaled loss.
    Hierarchical: largest block norm ``||X_block' y_eq||``, an upper bound.
    Ordered: ``max |x_col' y_eq|``, an upper bound (zero is then a fixed point
    of the lifted prox-gradient step).
    """
    kind = PenaltyKind.parse(kind)
    X, Y = design.X, design.Y
    if layout is None:
        layout = GroupLayout(X.shape[1] // design.p, design.p)
    corr = X.T @ Y  # (q*p, n_eq)
    if kind is PenaltyKind.HIERARCHICAL:
        blocks = corr.reshape(layout.q, layout.p, -1)
        value = float(np.sqrt((blocks**2).sum(axis=1)).max())
    else:
        value = float(np.abs(corr).max())
    if not np.isfinite(value) or value <= 0.0:
        raise ValueError("degenerate design: X'Y is zero, every sparsity level gives the null model")
    return value


# --------------------------------------------------------------------------
# numba kernels


@njit(cache=True)
def _soft_kernel(z, t, out):
    for i in range(z.shape[0]):
        a = abs(z[i]) - t
        if a > 0.0:
            out[i] = a if z[i] > 0 else -a
        else:
            out[i] = 0.0


@njit(cache=True)
def _prox_hier_kernel(z, t, q, p, out):
    factors = np.empty(p)
    for j in range(q):
        off = j * p
        ssq = 0.0
        for l in range(p - 1, -1, -1):
            nrm2 = z[off + l] * z[off + l] + ssq
            nrm = np.sqrt(nrm2)
            if nrm <= t * (1.0 + _TIE_EPS):
                factors[l] = 0.0
                ssq = 0.0
            else:
                f = 1.0 - t / nrm
                factors[l] = f
                ssq = f * f * nrm2
        scale = 1.0
        for l in range(p):
            scale *= factors[l]
            out[off + l] = z[off + l] * scale


@njit(cache=True)
def _pava_nonneg_kernel(v, off, p, out):
    """Project v[off:off+p] onto the nonneg non-increasing cone, into out[off:off+p]."""
    vals = np.empty(p)
    wts = np.empty(p)
    nb = 0
    for i in range(p):
        vals[nb] = v[off + i]
        wts[nb] = 1.0
        nb += 1
        while nb > 1 and vals[nb - 2] < vals[nb - 1]:
            w = wts[nb - 2] + wts[nb - 1]
            vals[nb - 2] = (wts[nb - 2] * vals[nb - 2] + wts[nb - 1] * vals[nb - 1]) / w
            wts[nb - 2] = w
            nb -= 1
    k = 0
    for b in range(nb):
        val = vals[b] if vals[b] > 0.0 else 0.0
        for _ in range(int(wts[b])):
            out[off + k] = val
            k += 1
