"""Exact nonparametric confidence for orderings of population quantiles."""

from .binom import BinomialCache, build_cache, interval_prob, lower_tail, upper_tail
from .core import (
    ConfidenceResult,
    GroupSample,
    OrderWitness,
    brute_force_confidence,
    permutation_scan,
    quantile_ci,
    quor_confidence,
    quor_confidence_pair,
)

__version__ = "0.1.0"
