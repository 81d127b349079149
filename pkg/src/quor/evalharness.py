"""Repeated stratified cross-validation of feature-selection methods.

Each training fold ranks the features afresh, keeps the ``top_k`` best and
fits a Gaussian naive Bayes classifier on them; the held-out fold is only
ever used for prediction.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import TextIO

import numpy as np

from .dataset import FeatureMatrix
from .ranking import METHODS, format_number, rank_features

__all__ = [
    "CVConfig",
    "CVReport",
    "MethodReport",
    "ConfigError",
    "GaussianNaiveBayes",
    "gaussian_nb_fit_predict",
    "stratified_folds",
    "run_cv",
]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CVConfig:
    folds: int = 5
    repeats: int = 20
    top_k: int = 20
    seed: int = 0
    methods: tuple[str, ...] = METHODS
    q: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.folds < 2:
            raise ConfigError(f"folds must be at least 2, got {self.folds}")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be at least 1, got {self.repeats}")
        if self.top_k < 1:
            raise ConfigError(f"top_k must be at least 1, got {self.top_k}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"unknown or empty methods {bad}; choose from {METHODS}")


class GaussianNaiveBayes:
    """Per-class independent normals per feature.

    Arrays are features x samples.  Missing (NaN) cells are ignored both
    when fitting and when scoring.  Variances get a floor of
    ``1e-9 * (global training variance + 1)``.
    """

    def fit(self, X, labels) -> "GaussianNaiveBayes":
        X = np.asarray(X, dtype=float)
        labels = np.asarray(labels).astype(str)
        if X.ndim != 2 or X.shape[1] != labels.size:
            raise ValueError(f"X has shape {X.shape} but {labels.size} labels were given")
        self.classes_ = np.array(sorted(set(labels.tolist())))
        if self.classes_.size == 0:
            raise ValueError("no training samples")
        finite = X[~np.isnan(X)]
        global_var = float(finite.var()) if finite.size else 0.0
        self.epsilon_ = 1e-9 * (global_var + 1.0)
        means, variances, priors = [], [], []
        with warnings.catch_warnings():
            # all-missing rows give NaN moments; scoring ignores them
            warnings.simplefilter("ignore", RuntimeWarning)
            for c in self.classes_:
                block = X[:, labels == c]
                means.append(np.nanmean(block, axis=1) if X.shape[0] else np.zeros(0))
                variances.append(np.nanvar(block, axis=1) if X.shape[0] else np.zeros(0))
                priors.append(block.shape[1] / labels.size)
        self.theta_ = np.array(means).reshape(len(self.classes_), X.shape[0])
        self.var_ = np.array(variances).reshape(len(self.classes_), X.shape[0]) + self.epsilon_
        self.log_prior_ = np.log(np.array(priors))
        return self

    def log_joint(self, X) -> np.ndarray:
        """Unnormalised log posterior, classes x samples."""
        X = np.asarray(X, dtype=float)
        mu = self.theta_[:, :, None]
        var = self.var_[:, :, None]
        ll = -0.5 * (np.log(2.0 * math.pi * var) + (X[None, :, :] - mu) ** 2 / var)
        # missing test values, or a class with no observed value, contribute nothing
        ll = np.where(np.isnan(ll), 0.0, ll)
        return self.log_prior_[:, None] + ll.sum(axis=1)

    def predict_log_proba(self, X) -> np.ndarray:
        joint = self.log_joint(X)
        top = joint.max(axis=0)
        return joint - (top + np.log(np.exp(joint - top).sum(axis=0)))

    def predict(self, X) -> np.ndarray:
        # argmax keeps the first maximum, i.e. the lexicographically smallest label
        return self.classes_[np.argmax(self.log_joint(X), axis=0)]


def gaussian_nb_fit_predict(train_X, train_labels, test_X) -> np.ndarray:
    return GaussianNaiveBayes().fit(train_X, train_labels).predict(test_X)


def stratified_folds(labels, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold index per sample: each group is shuffled and dealt round-robin.

    Groups are visited in sorted label order and the deal continues across
    groups, so fold sizes differ by at most one.
    """
    labels = np.asarray(labels).astype(str)
    fold_of = np.empty(labels.size, dtype=np.intp)
    offset = 0
    for g in sorted(set(labels.tolist())):
        cols = np.flatnonzero(labels == g)
        if cols.size < folds:
            raise ConfigError(f"group {g!r} has {cols.size} samples, fewer than {folds} folds")
        order = rng.permutation(cols.size)
        fold_of[cols[order]] = (offset + np.arange(cols.size)) % folds
        offset += cols.size
    return fold_of


@dataclass
class MethodReport:
    method: str
    mean_accuracy: float
    std_accuracy: float
    per_repeat: list[float]
    per_fold: list[list[float]]


@dataclass
class CVReport:
    config: CVConfig
    methods: dict[str, MethodReport] = field(default_factory=dict)

    def __getitem__(self, method: str) -> MethodReport:
        return self.methods[method]

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["methods"] = list(self.config.methods)
        return {"config": cfg, "methods": {m: asdict(r) for m, r in self.methods.items()}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write_tsv(self, fh: TextIO) -> None:
        cfg = self.config
        fh.write(
            f"# folds={cfg.folds} repeats={cfg.repeats} top_k={cfg.top_k} seed={cfg.seed} q={cfg.q}\n"
        )
        fh.write("method\tmean_accuracy\tstd_accuracy\tper_repeat\n")
        for m, r in self.methods.items():
            reps = ",".join(format_number(a) for a in r.per_repeat)
            fh.write(f"{m}\t{format_number(r.mean_accuracy)}\t{format_number(r.std_accuracy)}\t{reps}\n")


def _repeat_rng(seed: int, repeat: int) -> np.random.Generator:
    # one independent stream per repeat, derived from (seed, repeat) only
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(repeat,)))


def run_cv(matrix: FeatureMatrix, config: CVConfig = CVConfig(), *, select_on_full: bool = False) -> CVReport:
    """Cross-validated accuracy of each selection method.

    The mean and standard deviation run over all ``folds * repeats`` fold
    accuracies; ``per_repeat`` holds the pooled accuracy of each repeat.
    ``select_on_full`` ranks once on the complete matrix, leaking the test
    folds into selection; it exists only to demonstrate that leak.
    """
    labels = np.asarray(matrix.group_labels)
    sizes = matrix.group_sizes()
    small = {g: n for g, n in sizes.items() if n < config.folds}
    if small:
        raise ConfigError(f"groups smaller than the fold count {config.folds}: {small}")

    fold_acc = {m: [] for m in config.methods}
    repeat_acc = {m: [] for m in config.methods}
    leaked = {}
    if select_on_full:
        leaked = {m: rank_features(matrix, m, config.q).top(config.top_k) for m in config.methods}

    for r in range(config.repeats):
        fold_of = stratified_folds(labels, config.folds, _repeat_rng(config.seed, r))
        per_fold = {m: [] for m in config.methods}
        hits = {m: 0 for m in config.methods}
        for f in range(config.folds):
            train = np.flatnonzero(fold_of != f)
            test = np.flatnonzero(fold_of == f)
            train_matrix = matrix.select_columns(train)
            for m in config.methods:
                if select_on_full:
                    chosen = leaked[m]
                else:
                    chosen = rank_features(train_matrix, m, config.q).top(config.top_k)
                rows = [matrix.index(fid) for fid in chosen]
                X = matrix.values[rows]
                pred = gaussian_nb_fit_predict(X[:, train], labels[train], X[:, test])
                correct = int((pred == labels[test]).sum())
                hits[m] += correct
                per_fold[m].append(correct / test.size)
        for m in config.methods:
            fold_acc[m].append(per_fold[m])
            repeat_acc[m].append(hits[m] / labels.size)

    report = CVReport(config)
    for m in config.methods:
        flat = np.array(fold_acc[m]).ravel()
        report.methods[m] = MethodReport(
            method=m,
            mean_accuracy=float(flat.mean()),
            std_accuracy=float(flat.std(ddof=1)) if flat.size > 1 else 0.0,
            per_repeat=repeat_acc[m],
            per_fold=fold_acc[m],
        )
    return report
