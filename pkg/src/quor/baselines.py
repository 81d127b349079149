"""Classical two-sample tests used as ranking baselines, and Holm's correction.

Every test returns a :class:`TestResult` whose ``direction`` is ``+1`` when
the second sample appears larger, ``-1`` when the first does and ``0`` when
neither does.  Swapping the samples keeps the p-value and flips the sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

__all__ = ["TestResult", "t_test", "u_test", "ks_test", "holm_bonferroni", "EXACT_U_MAX_SIZE"]

# exact Mann-Whitney null distribution below this combined size (tie-free only)
EXACT_U_MAX_SIZE = 20


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    direction: int
    degenerate: bool = False
    exact: bool = False

    __test__ = False  # not a pytest class


def _sample(x, name, min_size=1):
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size < min_size:
        raise ValueError(f"sample {name} needs at least {min_size} value(s), got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"sample {name} contains non-finite values")
    return arr


def _sign(x: float) -> int:
    return int(x > 0) - int(x < 0)


def t_test(a, b, welch: bool = False) -> TestResult:
    """Two-sided two-sample t-test; pooled variance unless ``welch``.

    The statistic is ``(mean_a - mean_b) / se``.  Zero spread in both
    samples is reported as degenerate: p = 1 for equal means, p = 0 with an
    infinite statistic otherwise.
    """
    a = _sample(a, "a", 2)
    b = _sample(b, "b", 2)
    na, nb = a.size, b.size
    diff = a.mean() - b.mean()
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if welch:
        se2 = va / na + vb / nb
        df = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1)) if se2 > 0 else na + nb - 2
    else:
        df = na + nb - 2
        pooled = ((na - 1) * va + (nb - 1) * vb) / df
        se2 = pooled * (1.0 / na + 1.0 / nb)
    direction = _sign(-diff)
    if se2 <= 0.0:
        if diff == 0.0:
            return TestResult(0.0, 1.0, "t", 0, degenerate=True)
        return TestResult(math.copysign(math.inf, diff), 0.0, "t", direction, degenerate=True)
    stat = diff / math.sqrt(se2)
    p = float(min(1.0, 2.0 * special.stdtr(df, -abs(stat))))
    return TestResult(float(stat), p, "t", direction)


def _rank_sum_u(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """U statistic of ``a`` (midranks for ties) and the tie-group sizes."""
    pooled = np.concatenate([a, b])
    sorter = np.argsort(pooled, kind="mergesort")
    xs = pooled[sorter]
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    counts = np.diff(np.r_[starts, xs.size])
    ranks = np.empty(xs.size)
    ranks[sorter] = np.repeat(starts + (counts + 1) / 2.0, counts)
    u_a = ranks[: a.size].sum() - a.size * (a.size + 1) / 2.0
    return float(u_a), counts


@lru_cache(maxsize=256)
def _u_counts(na: int, nb: int) -> tuple[int, ...]:
    """Number of rank arrangements giving each U value, U = 0..na*nb.

    Uses the recursion N(u; na, nb) = N(u - nb; na - 1, nb) + N(u; na, nb - 1).
    """
    # f[i][j] = count vector for sizes (i, j); built row by row
    rows = [[(1,)] * (nb + 1)]
    for i in range(1, na + 1):
        row = [(1,)]
        for j in range(1, nb + 1):
            take = rows[i - 1][j]  # shifted by j
            skip = row[j - 1]
            size = i * j + 1
            vec = [0] * size
            for u, c in enumerate(skip):
                vec[u] += c
            for u, c in enumerate(take):
                vec[u + j] += c
            row.append(tuple(vec))
        rows.append(row)
    return rows[na][nb]


def _exact_u_p(u: float, na: int, nb: int) -> float:
    counts = _u_counts(na, nb)
    total = math.comb(na + nb, na)
    k = int(round(u))
    lower = sum(counts[: k + 1])
    upper = sum(counts[k:])
    return min(1.0, 2.0 * min(lower, upper) / total)


def u_test(a, b) -> TestResult:
    """Two-sided Mann-Whitney U test; the statistic is U for sample ``a``.

    Exact when the combined size is at most ``EXACT_U_MAX_SIZE`` and there
    are no ties; otherwise the normal approximation with tie and continuity
    corrections.
    """
    a = _sample(a, "a")
    b = _sample(b, "b")
    na, nb = a.size, b.size
    u, counts = _rank_sum_u(a, b)
    mean = na * nb / 2.0
    direction = _sign(mean - u)
    tied = counts.size < na + nb
    if na + nb <= EXACT_U_MAX_SIZE and not tied:
        return TestResult(u, _exact_u_p(u, na, nb), "u", direction, exact=True)
    n = na + nb
    tie_term = float(((counts**3) - counts).sum()) / (n * (n - 1))
    var = na * nb / 12.0 * ((n + 1) - tie_term)
    if var <= 0.0:
        return TestResult(u, 1.0, "u", 0, degenerate=True)
    z = (abs(u - mean) - 0.5) / math.sqrt(var)
    p = 1.0 if z <= 0 else min(1.0, math.erfc(z / math.sqrt(2.0)))
    return TestResult(u, p, "u", direction)


def ks_test(a, b) -> TestResult:
    """Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.

    ``D = sup |F_a - F_b|``; the p-value is the Kolmogorov survival function
    at ``sqrt(na * nb / (na + nb)) * D``, so it is approximate for small
    samples.
    """
    a = np.sort(_sample(a, "a"))
    b = np.sort(_sample(b, "b"))
    na, nb = a.size, b.size
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / na
    fb = np.searchsorted(b, grid, side="right") / nb
    d_plus = float(np.max(fa - fb))  # a stochastically smaller -> b larger
    d_minus = float(np.max(fb - fa))
    d = max(d_plus, d_minus, 0.0)
    direction = _sign(d_plus - d_minus)
    en = na * nb / (na + nb)
    p = 1.0 if d == 0.0 else float(min(1.0, special.kolmogorov(math.sqrt(en) * d)))
    return TestResult(d, p, "ks", direction)


def holm_bonferroni(p_values) -> np.ndarray:
    """Holm step-down adjusted p-values, returned in the input order."""
    p = np.asarray(p_values, dtype=float).ravel()
    if p.size and (np.any(~np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0):
        raise ValueError("p-values must lie in [0, 1]")
    n = p.size
    order = np.argsort(p, kind="stable")
    scaled = (n - np.arange(n)) * p[order]
    adjusted = np.minimum(1.0, np.maximum.accumulate(scaled))
    out = np.empty(n)
    out[order] = adjusted
    return out
