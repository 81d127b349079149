"""Binomial tail and interval probabilities for order statistics.

For a sorted sample of size ``m`` from a population whose quantile at
percentage ``q`` is ``Q``, the number ``K`` of observations below ``Q`` is
Binomial(m, q).  Hence

    Pr(X^(j) <= Q) = Pr(K >= j)          (upper_tail)
    Pr(X^(j) >= Q) = Pr(K <= j - 1)      (lower_tail)
    Pr(X^(j) <= Q <= X^(jp)) = Pr(j <= K <= jp - 1)   (interval_prob)

with the sentinel conventions X^(0) = -inf and X^(m+1) = +inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

__all__ = [
    "BinomialCache",
    "build_cache",
    "upper_tail",
    "lower_tail",
    "interval_prob",
    "log_interval",
    "log_upper_interval",
]


def _compensated_cumsum(values: np.ndarray) -> np.ndarray:
    # Neumaier summation; keeps prefix sums accurate to a few ulps.
    out = np.empty(len(values))
    total = 0.0
    comp = 0.0
    for k, v in enumerate(values.tolist()):
        t = total + v
        if abs(total) >= abs(v):
            comp += (total - t) + v
        else:
            comp += (v - t) + total
        total = t
        out[k] = total + comp
    return out


def _binomial_pmf(m: int, q: float) -> np.ndarray:
    if q == 0.0 or q == 1.0:
        pmf = np.zeros(m + 1)
        pmf[0 if q == 0.0 else m] = 1.0
        return pmf
    k = np.arange(m + 1, dtype=float)
    half = m // 2 + 1
    # log C(m, k) evaluated on the lower half and mirrored, so that the
    # coefficient array is exactly symmetric.
    lo = gammaln(m + 1.0) - (gammaln(k[:half] + 1.0) + gammaln(m - k[:half] + 1.0))
    log_coef = np.empty(m + 1)
    log_coef[:half] = lo
    log_coef[m - np.arange(half)] = lo
    # log(1 - q) rather than log1p(-q): mirrored caches (q vs 1 - q) then see
    # bit-identical logarithms whenever 1 - q is exact
    log_pmf = log_coef + (k * math.log(q) + (m - k) * math.log(1.0 - q))
    return np.exp(log_pmf)


@dataclass(frozen=True, eq=False)
class BinomialCache:
    """Cumulative Binomial(m, q) probabilities.

    ``cdf[j] = Pr(K <= j)`` and ``sf[j] = Pr(K >= j)`` for ``j = 0..m``;
    ``sf`` carries one extra trailing entry ``sf[m + 1] = 0``.  Both are
    accumulated independently (left-to-right and right-to-left) so each tail
    keeps full relative precision where it is small.
    """

    m: int
    q: float
    pmf: np.ndarray
    cdf: np.ndarray
    sf: np.ndarray
    # log interval_prob(0, jp) and log interval_prob(j, m + 1), indices 0..m+1
    log_head: np.ndarray = None
    log_tail: np.ndarray = None

    def __repr__(self) -> str:
        return f"BinomialCache(m={self.m}, q={self.q})"


@lru_cache(maxsize=1024)
def build_cache(m: int, q: float) -> BinomialCache:
    """Precompute the Binomial(m, q) cumulative table.

    Raises ``ValueError`` for ``m < 0`` or ``q`` outside [0, 1].
    """
    if isinstance(m, bool) or int(m) != m or m < 0:
        raise ValueError(f"sample size must be a nonnegative integer, got {m!r}")
    m = int(m)
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {q!r}")

    pmf = _binomial_pmf(m, q)
    # normalise by the correctly rounded total so cdf[m] == sf[0] == 1
    total = math.fsum(pmf.tolist())
    pmf = pmf / total
    cdf = _compensated_cumsum(pmf)
    sf = np.zeros(m + 2)
    sf[: m + 1] = _compensated_cumsum(pmf[::-1])[::-1]
    cdf[m] = 1.0
    sf[0] = 1.0
    np.minimum(cdf, 1.0, out=cdf)
    np.minimum(sf, 1.0, out=sf)
    for arr in (pmf, cdf, sf):
        arr.setflags(write=False)
    cache = BinomialCache(m=m, q=q, pmf=pmf, cdf=cdf, sf=sf)
    idx = np.arange(m + 2)
    head, tail = log_interval(cache, 0, idx), log_upper_interval(cache, idx)
    head.setflags(write=False)
    tail.setflags(write=False)
    object.__setattr__(cache, "log_head", head)
    object.__setattr__(cache, "log_tail", tail)
    return cache


def _check_index(cache: BinomialCache, j: int, name: str = "j") -> int:
    if not 0 <= j <= cache.m + 1:
        raise ValueError(f"{name}={j} outside [0, {cache.m + 1}]")
    return int(j)


def _below(cache: BinomialCache, j: int) -> float:
    """Pr(K <= j - 1)."""
    return 0.0 if j == 0 else float(cache.cdf[j - 1])


def upper_tail(cache: BinomialCache, j: int) -> float:
    """Pr(X^(j) <= Q) = Pr(K >= j); 1 at j = 0 and 0 at j = m + 1."""
    j = _check_index(cache, j)
    return float(cache.sf[j])


def lower_tail(cache: BinomialCache, j: int) -> float:
    """Pr(X^(j) >= Q) = Pr(K <= j - 1); 0 at j = 0 and 1 at j = m + 1."""
    j = _check_index(cache, j)
    return 1.0 if j == cache.m + 1 else _below(cache, j)


def interval_prob(cache: BinomialCache, j: int, jp: int) -> float:
    """Pr(X^(j) <= Q <= X^(jp)) = Pr(j <= K <= jp - 1).

    Equal to ``max(0, lower_tail(jp) + upper_tail(j) - 1)`` but evaluated
    from whichever tails avoid subtracting numbers close to one: an interval
    lying in the lower half is a difference of ``cdf`` entries, one lying in
    the upper half a difference of ``sf`` entries, and one straddling the
    middle is one minus the two (small) outside masses.
    """
    j = _check_index(cache, j)
    jp = _check_index(cache, jp, "jp")
    if j >= jp:
        return 0.0
    a = _below(cache, j)
    b = float(cache.sf[jp])
    if b >= 0.5 > a:
        val = float(cache.cdf[jp - 1]) - a
    elif a >= 0.5 > b:
        val = float(cache.sf[j]) - b
    else:
        val = 1.0 - (a + b)
    return max(val, 0.0)


def log_interval(cache: BinomialCache, j: int, jp: np.ndarray) -> np.ndarray:
    """Natural log of :func:`interval_prob` for one ``j`` against many ``jp``.

    Vectorised counterpart used by the dynamic program; ``log 0 = -inf``.
    """
    jp = np.asarray(jp, dtype=np.intp)
    a = _below(cache, j)
    b = cache.sf[jp]
    # cdf[jp - 1] with jp == 0 maps to index -1, but those entries are empty
    # intervals (j >= jp) and get masked below.
    left = cache.cdf[np.maximum(jp - 1, 0)] - a
    right = cache.sf[j] - b
    mid = 1.0 - (a + b)
    val = np.where((b >= 0.5) & (a < 0.5), left, np.where((a >= 0.5) & (b < 0.5), right, mid))
    val = np.where(jp > j, np.maximum(val, 0.0), 0.0)
    with np.errstate(divide="ignore"):
        return np.log(val)


def log_upper_interval(cache: BinomialCache, j: np.ndarray) -> np.ndarray:
    """``log interval_prob(cache, j, m + 1)`` for many ``j`` (open upper end).

    Same evaluation rule as :func:`log_interval`, so a sample and its mirror
    image (negated values, ``1 - q``) give bit-identical scores at both ends.
    """
    j = np.asarray(j, dtype=np.intp)
    a = np.where(j > 0, cache.cdf[np.maximum(j - 1, 0)], 0.0)
    val = np.where(a >= 0.5, cache.sf[np.minimum(j, cache.m + 1)], 1.0 - a)
    val = np.where(j <= cache.m, np.maximum(val, 0.0), 0.0)
    with np.errstate(divide="ignore"):
        return np.log(val)
