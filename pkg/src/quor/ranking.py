"""Rank the features of a matrix by quantile-order confidence or by a baseline test."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from . import baselines
from .core import GroupSample, permutation_scan, quor_confidence_pair
from .dataset import FeatureMatrix, FeatureSkipped, feature_groups

__all__ = [
    "METHODS",
    "RankingEntry",
    "Ranking",
    "score_feature",
    "rank_features",
    "threshold_summary",
    "baseline_rejections",
    "write_ranking_tsv",
    "write_ranking_jsonl",
    "format_number",
]

METHODS = ("quor", "t", "u", "ks")
CORRECTIONS = ("none", "holm")
TSV_COLUMNS = ("feature_id", "method", "score", "direction", "rank", "adjusted_p", "confidence")

_BASELINES = {"t": baselines.t_test, "u": baselines.u_test, "ks": baselines.ks_test}


def format_number(x: float | None) -> str:
    """12 significant digits; ``-inf``/``inf`` spelled out, ``None`` as empty."""
    if x is None:
        return ""
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return f"{x:.12g}"


@dataclass(frozen=True)
class RankingEntry:
    """One scored feature.

    ``score`` is a natural-log confidence for ``quor`` and a two-sided
    p-value for the baselines; ``rank`` is 0 until the ranking assigns it.
    """

    feature_id: str
    score: float
    direction: str
    method: str
    rank: int = 0
    adjusted_p: float | None = None

    @property
    def confidence(self) -> float | None:
        return math.exp(self.score) if self.method == "quor" else None


@dataclass
class Ranking:
    entries: list[RankingEntry]
    skipped: list[FeatureSkipped] = field(default_factory=list)
    method: str = "quor"
    correction: str = "none"

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def feature_ids(self) -> list[str]:
        return [e.feature_id for e in self.entries]

    def top(self, k: int) -> list[str]:
        return [e.feature_id for e in self.entries[:k]]

    def above(self, min_confidence: float) -> list[RankingEntry]:
        """Quor entries whose confidence reaches ``min_confidence``."""
        if self.method != "quor":
            raise ValueError("confidence thresholds apply to quor rankings only")
        return [e for e in self.entries if e.confidence >= min_confidence]


def _baseline_direction(groups: Sequence[GroupSample], sign: int) -> str:
    a, b = groups[0].label, groups[1].label
    if sign > 0:
        return f"Q_{a}<Q_{b}"
    if sign < 0:
        return f"Q_{b}<Q_{a}"
    return "none"


def score_feature(groups: Sequence[GroupSample], method: str = "quor", feature_id: str = "") -> RankingEntry:
    """Score one feature's groups (rank left unset).

    ``quor`` keeps the better of the two orderings (all orderings for more
    than two groups); the baselines need exactly two groups.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if len(groups) < 2:
        raise ValueError("need at least 2 groups")
    if method == "quor":
        if len(groups) == 2:
            fwd = quor_confidence_pair(groups[0], groups[1])
            rev = quor_confidence_pair(groups[1], groups[0])
            best = rev if rev.log_confidence > fwd.log_confidence else fwd
        else:
            best = permutation_scan(groups)[0]
        return RankingEntry(feature_id, best.log_confidence, best.statement, method)
    if len(groups) != 2:
        raise ValueError(f"method {method!r} compares exactly 2 groups, got {len(groups)}")
    res = _BASELINES[method](groups[0].values, groups[1].values)
    return RankingEntry(feature_id, res.p_value, _baseline_direction(groups, res.direction), method)


def _sort_key(method: str):
    if method == "quor":
        return lambda e: (-e.score, e.feature_id)
    return lambda e: (e.score, e.feature_id)


def rank_features(matrix: FeatureMatrix, method: str = "quor", q: float | Mapping[str, float] = 0.5,
                  correction: str = "none") -> Ranking:
    """Score every feature and sort: quor by descending confidence, baselines
    by ascending p-value, ties by feature id.

    Holm adjustment (baselines only) runs over all scored features.
    Features that cannot be scored are listed in ``Ranking.skipped``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if correction not in CORRECTIONS:
        raise ValueError(f"unknown correction {correction!r}; choose from {CORRECTIONS}")
    if correction != "none" and method == "quor":
        raise ValueError("multiple-test correction does not apply to quor confidences")
    columns = matrix.group_columns()
    if method != "quor" and len(columns) != 2:
        raise ValueError(f"method {method!r} compares exactly 2 groups, matrix has {len(columns)}")

    entries, skipped = [], []
    for fid in matrix.feature_ids:
        try:
            groups = feature_groups(matrix, fid, q, _columns=columns)
            if method in ("t",) and any(g.m < 2 for g in groups):
                raise FeatureSkipped(fid, "t-test needs at least 2 values per group")
        except FeatureSkipped as skip:
            skipped.append(skip)
            continue
        entries.append(score_feature(groups, method, fid))

    entries.sort(key=_sort_key(method))
    if correction == "holm" and entries:
        adj = baselines.holm_bonferroni([e.score for e in entries])
        entries = [replace(e, adjusted_p=float(p)) for e, p in zip(entries, adj)]
    entries = [replace(e, rank=i) for i, e in enumerate(entries, start=1)]
    return Ranking(entries, skipped, method, correction)


def threshold_summary(ranking: Ranking, min_confidence: float = 0.95) -> dict:
    """Count quor features at or above a confidence and split them by direction."""
    hits = ranking.above(min_confidence)
    return {
        "min_confidence": min_confidence,
        "selected": len(hits),
        "by_direction": dict(sorted(Counter(e.direction for e in hits).items())),
        "feature_ids": [e.feature_id for e in hits],
    }


def baseline_rejections(matrix: FeatureMatrix, feature_ids: Iterable[str], methods=("t", "u"),
                        alpha: float = 0.05, q: float = 0.5) -> dict:
    """Reject/non-reject counts for baseline tests on a preselected feature set,
    without and with Holm correction restricted to that set."""
    sub = matrix.select_features(list(feature_ids))
    out = {}
    for method in methods:
        ranking = rank_features(sub, method, q, correction="holm") if len(sub.feature_ids) else None
        raw = np.array([e.score for e in ranking]) if ranking else np.array([])
        adj = np.array([e.adjusted_p for e in ranking]) if ranking else np.array([])
        out[method] = {
            "no_correction": {"reject": int((raw < alpha).sum()), "non_reject": int((raw >= alpha).sum())},
            "holm": {"reject": int((adj < alpha).sum()), "non_reject": int((adj >= alpha).sum())},
        }
    return out


def _entry_cells(e: RankingEntry) -> list[str]:
    return [
        e.feature_id,
        e.method,
        format_number(e.score),
        e.direction,
        str(e.rank),
        format_number(e.adjusted_p),
        format_number(e.confidence),
    ]


def write_ranking_tsv(entries: Iterable[RankingEntry], fh: TextIO) -> None:
    fh.write("\t".join(TSV_COLUMNS) + "\n")
    for e in entries:
        fh.write("\t".join(_entry_cells(e)) + "\n")


def write_ranking_jsonl(entries: Iterable[RankingEntry], fh: TextIO) -> None:
    for e in entries:
        rec = dict(zip(TSV_COLUMNS, _entry_cells(e)))
        rec["rank"] = e.rank
        fh.write(json.dumps(rec, sort_keys=False) + "\n")
