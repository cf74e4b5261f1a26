"""Exact small-sample statistics used by the classifier.

Everything works in log space off a shared table of ``ln(i!)`` so that
binomial and hypergeometric coefficients cost O(1) each.  Scalar and
vectorised forms are provided; the vectorised ones are what the model
uses on its hot paths.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

FISHER_FLOOR = 1e-300


class LogFactorialTable:
    """Lazily grown table of ``ln(i!)`` for ``i = 0..n_max``.

    Growth builds a new array and swaps the reference, so a reader never
    sees a partially filled table.
    """

    def __init__(self, n_max: int = 1024):
        self._lock = threading.Lock()
        self._values = self._build(max(int(n_max), 1))

    @staticmethod
    def _build(n_max):
        return gammaln(np.arange(n_max + 1, dtype=float) + 1.0)

    @property
    def n_max(self) -> int:
        return len(self._values) - 1

    def ensure(self, n: int) -> np.ndarray:
        values = self._values
        if n < len(values):
            return values
        with self._lock:
            values = self._values
            if n >= len(values):
                size = len(values) - 1
                while size < n:
                    size *= 2
                values = self._build(size)
                self._values = values
        return values

    def __getitem__(self, i):
        i = np.asarray(i)
        values = self.ensure(int(i.max()) if i.size else 0)
        return values[i]

    def log_comb(self, n, k):
        """ln C(n, k); callers guarantee 0 <= k <= n."""
        n = np.asarray(n)
        values = self.ensure(int(n.max()) if n.size else 0)
        k = np.asarray(k)
        return values[n] - values[k] - values[n - k]


LOG_FACTORIAL = LogFactorialTable()


@dataclass(frozen=True)
class ContingencyTable2x2:
    """Counts of a 2x2 table with rows E=1/E=0 and columns C=1/C=0."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise ValueError(f"negative cell in {self}")

    @classmethod
    def from_margins(cls, a: int, row: int, col: int, n: int) -> "ContingencyTable2x2":
        """Build from the top-left cell, the E=1 row total, the C=1 column total and n."""
        b, c = row - a, col - a
        return cls(a, b, c, n - row - col + a)

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d

    @property
    def row(self) -> int:
        return self.a + self.b

    @property
    def col(self) -> int:
        return self.a + self.c


def _check_margins(x, n, col, row):
    if not (0 <= col <= n and 0 <= row <= n):
        raise ValueError(f"invalid margins n={n}, o_j={col}, o_z={row}")
    lo = max(0, row + col - n)
    if not (lo <= x <= min(col, row)):
        raise ValueError(f"cell count {x} outside [{lo}, {min(col, row)}] "
                         f"for n={n}, o_j={col}, o_z={row}")


def hypergeom_logpmf(x, n, col, row):
    """Vectorised ln P(X = x) for X ~ Hypergeometric(n, col successes, row draws).

    No validation; all arguments must already describe admissible tables.
    """
    lc = LOG_FACTORIAL.log_comb
    x, n, col, row = np.broadcast_arrays(*(np.asarray(v, dtype=np.int64) for v in (x, n, col, row)))
    return lc(col, x) + lc(n - col, row - x) - lc(n, row)


def hypergeom_pmf(x: int, n: int, col: int, row: int) -> float:
    """Probability that the C=1/E=1 cell equals ``x`` given the table margins.

    ``col`` is the class total o_j and ``row`` the tuple total o(z).
    """
    _check_margins(x, n, col, row)
    return float(math.exp(hypergeom_logpmf(x, n, col, row)))


def fisher_upper_tail(t: ContingencyTable2x2) -> float:
    """One-sided (over-representation) Fisher exact p-value.

    Sums the hypergeometric masses of ``a, a+1, ..., a + min(b, c)``.
    """
    return float(fisher_upper_tail_counts(t.a, t.row, t.col, t.n))


def fisher_upper_tail_counts(a, row, col, n):
    """Vectorised upper tail over arrays of (a, o(z), o_j, n).

    Rows with ``row == 0`` get p = 1.  Results are clipped away from zero
    so an underflowing tail still reads as a positive probability.
    """
    a, row, col, n = np.broadcast_arrays(*(np.asarray(v, dtype=np.int64) for v in (a, row, col, n)))
    shape = a.shape
    a, row, col, n = a.ravel(), row.ravel(), col.ravel(), n.ravel()
    if a.size and (np.any(a < 0) or np.any(a > np.minimum(row, col))
                   or np.any(row - a > n - col)):
        raise ValueError("invalid contingency counts")
    length = np.minimum(row - a, col - a) + 1
    owner = np.repeat(np.arange(a.size), length)
    offset = np.arange(owner.size) - np.repeat(np.cumsum(length) - length, length)
    terms = hypergeom_logpmf(a[owner] + offset, n[owner], col[owner], row[owner])
    # per-table logsumexp
    peak = np.full(a.size, -np.inf)
    np.maximum.at(peak, owner, terms)
    acc = np.zeros(a.size)
    np.add.at(acc, owner, np.exp(terms - peak[owner]))
    with np.errstate(over="ignore"):
        p = np.exp(peak + np.log(acc))
    p = np.clip(p, np.finfo(float).tiny, 1.0)
    return p.reshape(shape) if shape else p[0]


def beta_cdf_int(t, r: int, B: int):
    """CDF of Beta(r, B - r + 1) at ``t`` for integer r.

    Equal to the probability that at least ``r`` of ``B`` uniforms fall at
    or below ``t``, and evaluated as that binomial tail in log space.
    ``t`` may be a scalar or an array.
    """
    if not 1 <= r <= B:
        raise ValueError(f"need 1 <= r <= B, got r={r}, B={B}")
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr < 0) | (t_arr > 1)):
        raise ValueError("t must lie in [0, 1]")
    out = _binomial_upper_tail(t_arr.ravel(), r, B).reshape(t_arr.shape)
    return float(out) if out.ndim == 0 else out


def _binomial_upper_tail(t, r, B):
    i = np.arange(r, B + 1)
    log_coef = LOG_FACTORIAL.log_comb(np.full_like(i, B), i)
    out = np.empty(t.shape)
    zero, one = t <= 0, t >= 1
    out[zero] = 0.0
    out[one] = 1.0
    mid = ~(zero | one)
    if np.any(mid):
        tm = t[mid][:, None]
        terms = log_coef + i * np.log(tm) + (B - i) * np.log1p(-tm)
        peak = terms.max(axis=1, keepdims=True)
        s = peak[:, 0] + np.log(np.exp(terms - peak).sum(axis=1))
        out[mid] = np.minimum(np.exp(s), 1.0)
    return out


def chi2_survival_even_df(x: float, df: int) -> float:
    """Upper tail of a chi-square with even ``df``, by its finite Poisson series."""
    if df < 2 or df % 2:
        raise ValueError(f"df must be an even integer >= 2, got {df}")
    if x < 0:
        raise ValueError("x must be non-negative")
    half = x / 2.0
    if half == 0:
        return 1.0
    i = np.arange(df // 2)
    terms = i * math.log(half) - LOG_FACTORIAL[i] - half
    peak = terms.max()
    return min(1.0, float(math.exp(peak + math.log(np.exp(terms - peak).sum()))))


def _as_pvals(pvals):
    p = np.asarray(pvals, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("need a non-empty list of p-values")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    return p


def combine_rop(pvals, r: int) -> float:
    """r-th ordered p-value: Beta(r, B - r + 1) CDF at the r-th smallest."""
    p = _as_pvals(pvals)
    if not 1 <= r <= p.size:
        raise ValueError(f"r={r} outside 1..{p.size}")
    return beta_cdf_int(np.sort(p, kind="stable")[r - 1], r, p.size)


def combine_fisher(pvals) -> float:
    p = np.maximum(_as_pvals(pvals), FISHER_FLOOR)
    return chi2_survival_even_df(float(-2.0 * np.log(p).sum()), 2 * p.size)


def combine_minp(pvals) -> float:
    p = _as_pvals(pvals)
    return beta_cdf_int(p.min(), 1, p.size)


def combine_maxp(pvals) -> float:
    p = _as_pvals(pvals)
    return beta_cdf_int(p.max(), p.size, p.size)


COMBINERS = ("rop", "fisher", "minp", "maxp")


def combine_columns(pvals: np.ndarray, method: str, r: int | None = None) -> np.ndarray:
    """Combine along the last axis of ``pvals`` (..., B) with the named method."""
    p = np.asarray(pvals, dtype=float)
    B = p.shape[-1]
    if method == "rop":
        if r is None or not 1 <= r <= B:
            raise ValueError(f"rop needs 1 <= r <= {B}, got {r}")
        stat = np.partition(p, r - 1, axis=-1)[..., r - 1]
        return beta_cdf_int(stat, r, B)
    if method == "minp":
        return beta_cdf_int(p.min(axis=-1), 1, B)
    if method == "maxp":
        return beta_cdf_int(p.max(axis=-1), B, B)
    if method == "fisher":
        stat = -2.0 * np.log(np.maximum(p, FISHER_FLOOR)).sum(axis=-1)
        flat = [chi2_survival_even_df(float(s), 2 * B) for s in np.ravel(stat)]
        return np.asarray(flat).reshape(np.shape(stat))
    raise ValueError(f"unknown combiner {method!r}; choose from {COMBINERS}")
