"""Confidence that quantiles of independent populations are ordered.

Given sorted samples ``x_1, ..., x_n`` and quantile percentages
``q_1, ..., q_n``, the confidence of ``Q_1 < Q_2 < ... < Q_n`` is the best
lower bound obtainable from a chain of order statistics

    -inf = x_1^(0) < x_1^(j'_1) < x_2^(j_2) < x_2^(j'_2) < ... < x_n^(j_n) < +inf

scored by the product over groups of ``Pr(j_i <= K_i <= j'_i - 1)`` with
``K_i ~ Binomial(m_i, q_i)``.  The maximisation runs as a dynamic program
over ``j'_i`` with ``j_i`` chosen as the first observation strictly above
``x_{i-1}^(j'_{i-1})``.  All scores are kept as natural logarithms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .binom import BinomialCache, build_cache, interval_prob, log_interval

__all__ = [
    "GroupSample",
    "OrderWitness",
    "ConfidenceResult",
    "PermutationLimitError",
    "EnumerationLimitError",
    "quor_confidence",
    "quor_confidence_pair",
    "permutation_scan",
    "brute_force_confidence",
    "evaluate_witness",
    "quantile_ci",
    "order_statistic",
]

NEG_INF = -math.inf


class PermutationLimitError(ValueError):
    """Raised when a permutation scan would exceed the factorial guard."""


class EnumerationLimitError(ValueError):
    """Raised when exhaustive witness enumeration is too large."""


@dataclass(frozen=True, eq=False)
class GroupSample:
    """One population's sample, sorted ascending, with its quantile level."""

    values: np.ndarray
    q: float = 0.5
    label: str = ""

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError(f"group {self.label!r}: sample must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"group {self.label!r}: sample contains non-finite values")
        if np.any(np.diff(vals) < 0):
            raise ValueError(f"group {self.label!r}: sample must be sorted ascending")
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"group {self.label!r}: quantile level must lie in (0, 1), got {self.q!r}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "label", str(self.label))

    @classmethod
    def from_unsorted(cls, values, q: float = 0.5, label: str = "") -> "GroupSample":
        return cls(np.sort(np.asarray(values, dtype=float)), q, label)

    @property
    def m(self) -> int:
        return int(self.values.size)

    @property
    def cache(self) -> BinomialCache:
        return build_cache(self.m, self.q)

    def __len__(self) -> int:
        return self.m


def order_statistic(sample: GroupSample, j: int) -> float:
    """``x^(j)`` with the sentinels ``x^(0) = -inf`` and ``x^(m+1) = +inf``."""
    if j <= 0:
        return -math.inf
    if j > sample.m:
        return math.inf
    return float(sample.values[j - 1])


@dataclass(frozen=True)
class OrderWitness:
    """Index pairs ``(j_i, j'_i)`` per group; 1-based, sentinels at 0 and m+1."""

    pairs: tuple[tuple[int, int], ...]

    def __str__(self) -> str:
        return ",".join(f"({j};{jp})" for j, jp in self.pairs)


@dataclass(frozen=True)
class ConfidenceResult:
    log_confidence: float
    witness: OrderWitness | None
    permutation: tuple[str, ...] = field(default=())

    @property
    def confidence(self) -> float:
        return math.exp(self.log_confidence)

    @property
    def statement(self) -> str:
        return "<".join(f"Q_{label}" for label in self.permutation)


def _check_groups(groups: Sequence[GroupSample]) -> None:
    if len(groups) < 2:
        raise ValueError(f"need at least 2 groups, got {len(groups)}")
    for g in groups:
        if not isinstance(g, GroupSample):
            raise TypeError(f"expected GroupSample, got {type(g).__name__}")


def _labels(groups: Sequence[GroupSample]) -> tuple[str, ...]:
    return tuple(g.label or str(i + 1) for i, g in enumerate(groups))


def _first_above(sample: GroupSample, value) -> np.ndarray:
    """Smallest 1-based index whose observation is strictly above ``value``."""
    return np.searchsorted(sample.values, value, side="right") + 1


def quor_confidence(groups: Sequence[GroupSample]) -> ConfidenceResult:
    """Log-confidence that ``Q_1 < ... < Q_n`` for the groups in the given order.

    Returns the maximising witness, or ``None`` with ``-inf`` when no strict
    chain of observations exists.  Space is linear in the total sample size:
    only the current and previous DP layers are live, plus one back-pointer
    array per group.
    """
    _check_groups(groups)
    n = len(groups)
    first = groups[0]
    prev = first.cache.log_head[1 : first.m + 1]  # D_1[l'] for l' = 1..m_1
    back: list[np.ndarray] = []

    for i in range(1, n - 1):
        g, p = groups[i], groups[i - 1]
        cache = g.cache
        starts = _first_above(g, p.values)  # j_i for each l'_{i-1}
        cur = np.full(g.m, NEG_INF)
        arg = np.zeros(g.m, dtype=np.intp)
        # starts is nondecreasing; for each distinct j keep the best predecessor
        distinct, first_pos = np.unique(starts, return_index=True)
        bounds = list(first_pos[1:]) + [len(starts)]
        for j, lo, hi in zip(distinct.tolist(), first_pos.tolist(), bounds):
            if j >= g.m:
                break
            seg = prev[lo:hi]
            k = int(np.argmax(seg))
            best = seg[k]
            if best == NEG_INF:
                continue
            # j'_i must point at a value strictly above x_i^(j_i)
            s = int(_first_above(g, g.values[j - 1]))
            if s > g.m:
                continue
            jps = np.arange(s, g.m + 1)
            cand = best + log_interval(cache, j, jps)
            sl = slice(s - 1, g.m)
            better = cand > cur[sl]
            cur[sl] = np.where(better, cand, cur[sl])
            arg[sl] = np.where(better, lo + k, arg[sl])
        back.append(arg)
        prev = cur

    last, p = groups[-1], groups[-2]
    starts = _first_above(last, p.values)
    total = prev + last.cache.log_tail[starts]
    k = int(np.argmax(total))
    best = float(total[k])
    labels = _labels(groups)
    if best == NEG_INF or math.isnan(best):
        return ConfidenceResult(NEG_INF, None, labels)

    # back-track l'_{n-1}, ..., l'_1 (0-based positions)
    ends = [k]
    for arg in reversed(back):
        ends.append(int(arg[ends[-1]]))
    ends.reverse()
    pairs = [(0, ends[0] + 1)]
    for i in range(1, n - 1):
        j = int(_first_above(groups[i], groups[i - 1].values[ends[i - 1]]))
        pairs.append((j, ends[i] + 1))
    pairs.append((int(starts[k]), last.m + 1))
    return ConfidenceResult(best, OrderWitness(tuple(pairs)), labels)


def quor_confidence_pair(a: GroupSample, b: GroupSample) -> ConfidenceResult:
    """Two-group shortcut for the confidence of ``Q_a < Q_b``.

    For each ``j'_a`` the matching ``j_b`` is found by a merge-style search
    over the sorted samples, so the whole sweep is O(m log m).
    """
    _check_groups([a, b])
    starts = _first_above(b, a.values)
    logs = a.cache.log_head[1 : a.m + 1] + b.cache.log_tail[starts]
    k = int(np.argmax(logs))
    best = float(logs[k])
    labels = _labels([a, b])
    if best == NEG_INF:
        return ConfidenceResult(NEG_INF, None, labels)
    witness = OrderWitness(((0, k + 1), (int(starts[k]), b.m + 1)))
    return ConfidenceResult(best, witness, labels)


def evaluate_witness(groups: Sequence[GroupSample], witness: OrderWitness) -> float:
    """Log-confidence of one witness; ``-inf`` if its value chain is not strict."""
    _check_groups(groups)
    if len(witness.pairs) != len(groups):
        raise ValueError("witness length does not match the number of groups")
    total = 0.0
    prev_hi = -math.inf
    for i, (g, (j, jp)) in enumerate(zip(groups, witness.pairs)):
        lo, hi = order_statistic(g, j), order_statistic(g, jp)
        if not (j < jp and lo < hi) or (i > 0 and not prev_hi < lo):
            return NEG_INF
        p = interval_prob(g.cache, j, jp)
        if p <= 0.0:
            return NEG_INF
        total += math.log(p)
        prev_hi = hi
    return total


def permutation_scan(groups: Sequence[GroupSample], max_n: int = 8) -> list[ConfidenceResult]:
    """Confidence of every ordering of the groups, best first.

    Ties keep lexicographic permutation order (of group positions).
    """
    _check_groups(groups)
    n = len(groups)
    if n > max_n:
        raise PermutationLimitError(
            f"{n} groups means {math.factorial(n)} orderings; the limit is {max_n} groups "
            f"({math.factorial(max_n)} orderings)"
        )
    labels = _labels(groups)
    out = []
    for perm in itertools.permutations(range(n)):
        ordered = [groups[i] for i in perm]
        if n == 2:
            res = quor_confidence_pair(*ordered)
        else:
            res = quor_confidence(ordered)
        out.append(ConfidenceResult(res.log_confidence, res.witness, tuple(labels[i] for i in perm)))
    out.sort(key=lambda r: -r.log_confidence)
    return out


def _bracket(m: int, q: float, j: int, jp: int) -> float:
    # max{0, Pr(X^(jp) >= Q) + Pr(X^(j) <= Q) - 1} from explicit binomial terms
    terms = [math.comb(m, k) * q**k * (1 - q) ** (m - k) for k in range(m + 1)]
    up = 1.0 if j == 0 else math.fsum(terms[j:])
    down = 1.0 if jp == m + 1 else math.fsum(terms[:jp])
    return max(0.0, down + up - 1.0)


def brute_force_confidence(groups: Sequence[GroupSample], limit: int = 10**7) -> ConfidenceResult:
    """Exhaustive maximum over every witness tuple.

    Slow by design: it is the reference the dynamic program is tested
    against, and shares no code with it beyond :class:`GroupSample`.
    """
    _check_groups(groups)
    n = len(groups)
    # (0; j'_1), interior (j_i; j'_i) with j_i < j'_i, (j_n; m_n + 1)
    size = (groups[0].m + 2) * (groups[-1].m + 2)
    size *= math.prod((g.m + 2) * (g.m + 1) // 2 for g in groups[1:-1])
    if size > limit:
        raise EnumerationLimitError(f"{size} witness tuples exceeds the enumeration limit {limit}")

    options = []
    for i, g in enumerate(groups):
        m = g.m
        if i == 0:
            js = [(0, jp) for jp in range(0, m + 2)]
        elif i == n - 1:
            js = [(j, m + 1) for j in range(0, m + 2)]
        else:
            js = [(j, jp) for j in range(m + 2) for jp in range(m + 2)]
        scored = []
        for j, jp in js:
            if j >= jp:
                continue
            lo, hi = order_statistic(g, j), order_statistic(g, jp)
            if not lo < hi:
                continue
            val = _bracket(m, g.q, j, jp)
            if val > 0.0:
                scored.append((j, jp, lo, hi, val))
        options.append(scored)

    best_val = 0.0
    best_pairs = None

    def walk(i, prev_hi, acc, chosen):
        nonlocal best_val, best_pairs
        if i == n:
            if acc > best_val:
                best_val, best_pairs = acc, tuple(chosen)
            return
        for j, jp, lo, hi, val in options[i]:
            if i > 0 and not prev_hi < lo:
                continue
            chosen.append((j, jp))
            walk(i + 1, hi, acc * val, chosen)
            chosen.pop()

    walk(0, -math.inf, 1.0, [])
    labels = _labels(groups)
    if best_pairs is None:
        return ConfidenceResult(NEG_INF, None, labels)
    return ConfidenceResult(math.log(best_val), OrderWitness(best_pairs), labels)


def quantile_ci(sample: GroupSample, gamma: float) -> tuple[int, int, float]:
    """Narrowest order-statistic interval covering the quantile with prob >= gamma.

    Returns ``(j, jp, coverage)`` where ``[x^(j), x^(jp)]`` is the interval
    (0 and m+1 meaning unbounded).  Width is measured in index steps ``jp - j``;
    among equally narrow intervals the smallest ``j`` wins.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {gamma!r}")
    cache = sample.cache
    m = sample.m
    for width in range(1, m + 2):
        for j in range(0, m + 2 - width):
            cov = interval_prob(cache, j, j + width)
            if cov >= gamma:
                return j, j + width, cov
    # width m + 1 always covers with probability one
    raise AssertionError("unreachable")
