"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric or internal error.
Results go to stdout (or ``--output``); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import contextlib
import math
import sys
from typing import Sequence

from .core import (
    GroupSample,
    PermutationLimitError,
    order_statistic,
    permutation_scan,
    quantile_ci,
    quor_confidence_pair,
)
from .dataset import FeatureSkipped, LoadError, feature_groups, load_matrix
from .evalharness import ConfigError, CVConfig, run_cv
from .ranking import METHODS, format_number, rank_features, write_ranking_jsonl, write_ranking_tsv

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _open_unit(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0.0 < x < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {text}")
    return x


def _closed_unit(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return x


def _positive_int(text: str) -> int:
    try:
        x = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if x < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return x


def _seed(text: str) -> int:
    try:
        x = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if not 0 <= x < 2**64:
        raise argparse.ArgumentTypeError(f"must be a 64-bit unsigned integer, got {text}")
    return x


def _value_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty value list")
    if not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("values must be finite")
    return vals


def _named_list(text: str) -> tuple[str, list[float]]:
    label, sep, rest = text.partition("=")
    if not sep or not label:
        raise argparse.ArgumentTypeError(f"expected LABEL=v1,v2,..., got {text!r}")
    return label, _value_list(rest)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="quor", description="Exact confidence for orderings of population quantiles.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_flags(p, required=False):
        p.add_argument("--input", required=required, help="feature matrix file")
        p.add_argument("--format", choices=("csv", "tsv"), default="csv")
        p.add_argument("--orientation", choices=("features_in_rows", "features_in_cols"),
                       default="features_in_rows")

    def quantile_flag(p):
        p.add_argument("--quantile", type=_open_unit, action="append",
                       help="quantile level; give once for all groups or once per group (default 0.5)")

    def output_flag(p):
        p.add_argument("--output", help="write results here instead of stdout")

    p = sub.add_parser("rank", help="rank all features of a matrix")
    data_flags(p, required=True)
    quantile_flag(p)
    output_flag(p)
    p.add_argument("--method", choices=METHODS, default="quor")
    p.add_argument("--correction", choices=("none", "holm"), default="none")
    p.add_argument("--min-confidence", type=_closed_unit, help="quor only: keep features at or above this confidence")
    p.add_argument("--top-k", type=_positive_int, help="print only the first K entries")
    p.add_argument("--json", action="store_true", help="emit JSON lines instead of TSV")

    p = sub.add_parser("compare", help="confidence of both orderings of two groups")
    data_flags(p)
    quantile_flag(p)
    output_flag(p)
    p.add_argument("--a", type=_value_list, help="first sample as comma-separated values")
    p.add_argument("--b", type=_value_list, help="second sample as comma-separated values")
    p.add_argument("--feature", help="feature id (with --input)")
    p.add_argument("--groups", help="two group labels A,B (with --input; default: the first two)")

    p = sub.add_parser("perms", help="confidence of every ordering of the groups")
    data_flags(p)
    quantile_flag(p)
    output_flag(p)
    p.add_argument("--group", type=_named_list, action="append", help="LABEL=v1,v2,... (repeatable)")
    p.add_argument("--feature", help="feature id (with --input)")
    p.add_argument("--max-groups", type=_positive_int, default=8)

    p = sub.add_parser("ci", help="order-statistic confidence interval for a quantile")
    data_flags(p)
    quantile_flag(p)
    output_flag(p)
    p.add_argument("--values", type=_value_list, help="sample as comma-separated values")
    p.add_argument("--feature", help="feature id (with --input)")
    p.add_argument("--group", help="group label (with --input)")
    p.add_argument("--gamma", type=_open_unit, default=0.95, help="required coverage (default 0.95)")

    p = sub.add_parser("eval", help="repeated stratified cross-validation of selection methods")
    data_flags(p, required=True)
    quantile_flag(p)
    output_flag(p)
    p.add_argument("--method", choices=METHODS, action="append", help="repeatable; default all")
    p.add_argument("--folds", type=_positive_int, default=5)
    p.add_argument("--repeats", type=_positive_int, default=20)
    p.add_argument("--top-k", type=_positive_int, default=20)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--json", action="store_true", help="emit JSON instead of TSV")
    return parser


def _single_quantile(args) -> float:
    qs = args.quantile or [0.5]
    if len(qs) != 1:
        raise UsageError("this command takes a single --quantile")
    return qs[0]


def _quantiles_for(args, labels: Sequence[str]):
    qs = args.quantile or [0.5]
    if len(qs) == 1:
        return [qs[0]] * len(labels)
    if len(qs) != len(labels):
        raise UsageError(f"got {len(qs)} --quantile values for {len(labels)} groups")
    return qs


def _load(args):
    return load_matrix(args.input, args.format, args.orientation)


def _matrix_groups(args, labels=None) -> list[GroupSample]:
    if not args.feature:
        raise UsageError("--input requires --feature")
    matrix = _load(args)
    if args.feature not in matrix.feature_ids:
        raise LoadError(f"unknown feature {args.feature!r}")
    groups = feature_groups(matrix, args.feature)
    if labels is not None:
        by_label = {g.label: g for g in groups}
        missing = [lab for lab in labels if lab not in by_label]
        if missing:
            raise LoadError(f"feature {args.feature!r} has no observed values for groups {missing}")
        groups = [by_label[lab] for lab in labels]
    qs = _quantiles_for(args, [g.label for g in groups])
    return [GroupSample(g.values, q, g.label) for g, q in zip(groups, qs)]


def _witness_text(res) -> str:
    return str(res.witness) if res.witness is not None else "-"


def _cmd_rank(args, out):
    matrix = _load(args)
    labels = matrix.groups
    qs = _quantiles_for(args, labels)
    q = dict(zip(labels, qs))
    if args.min_confidence is not None and args.method != "quor":
        raise UsageError("--min-confidence applies to --method quor only")
    if args.correction != "none" and args.method == "quor":
        raise UsageError("--correction applies to baseline methods only; quor confidences are not p-values")
    ranking = rank_features(matrix, args.method, q, args.correction)
    entries = ranking.entries
    if args.min_confidence is not None:
        entries = ranking.above(args.min_confidence)
    if args.top_k is not None:
        entries = entries[: args.top_k]
    (write_ranking_jsonl if args.json else write_ranking_tsv)(entries, out)
    for skip in ranking.skipped:
        print(f"skipped {skip}", file=sys.stderr)


def _cmd_compare(args, out):
    if args.input:
        labels = args.groups.split(",") if args.groups else None
        if labels is not None and len(labels) != 2:
            raise UsageError("--groups takes exactly two labels")
        if labels is None:
            groups = _matrix_groups(args)[:2]
        else:
            groups = _matrix_groups(args, labels)
        a, b = groups
    else:
        if args.a is None or args.b is None:
            raise UsageError("give --a and --b, or --input with --feature")
        qa, qb = _quantiles_for(args, ["a", "b"])
        a = GroupSample.from_unsorted(args.a, qa, "a")
        b = GroupSample.from_unsorted(args.b, qb, "b")
    out.write("statement\tlog_confidence\tconfidence\twitness\n")
    for res in (quor_confidence_pair(a, b), quor_confidence_pair(b, a)):
        out.write(f"{res.statement}\t{format_number(res.log_confidence)}\t"
                  f"{format_number(res.confidence)}\t{_witness_text(res)}\n")


def _cmd_perms(args, out):
    if args.input:
        groups = _matrix_groups(args)
    else:
        if not args.group:
            raise UsageError("give --group LABEL=values (repeatable), or --input with --feature")
        labels = [lab for lab, _ in args.group]
        if len(set(labels)) != len(labels):
            raise UsageError("group labels must be distinct")
        qs = _quantiles_for(args, labels)
        groups = [GroupSample.from_unsorted(v, q, lab) for (lab, v), q in zip(args.group, qs)]
    if len(groups) < 2:
        raise UsageError("need at least 2 groups")
    results = permutation_scan(groups, max_n=args.max_groups)
    out.write("rank\tstatement\tlog_confidence\tconfidence\twitness\n")
    for i, res in enumerate(results, start=1):
        out.write(f"{i}\t{res.statement}\t{format_number(res.log_confidence)}\t"
                  f"{format_number(res.confidence)}\t{_witness_text(res)}\n")


def _cmd_ci(args, out):
    q = _single_quantile(args)
    if args.input:
        if not args.group:
            raise UsageError("--input requires --feature and --group")
        sample = _matrix_groups(args, [args.group])[0]
        sample = GroupSample(sample.values, q, sample.label)
    else:
        if args.values is None:
            raise UsageError("give --values, or --input with --feature and --group")
        sample = GroupSample.from_unsorted(args.values, q, "x")
    lo, hi, cov = quantile_ci(sample, args.gamma)
    out.write("quantile\tlo_index\thi_index\tlo_value\thi_value\tconfidence\tlog_confidence\n")
    log_cov = math.log(cov) if cov > 0 else -math.inf
    out.write(f"{format_number(q)}\t{lo}\t{hi}\t{format_number(order_statistic(sample, lo))}\t"
              f"{format_number(order_statistic(sample, hi))}\t{format_number(cov)}\t{format_number(log_cov)}\n")


def _cmd_eval(args, out):
    matrix = _load(args)
    config = CVConfig(
        folds=args.folds,
        repeats=args.repeats,
        top_k=args.top_k,
        seed=args.seed,
        methods=tuple(args.method or METHODS),
        q=_single_quantile(args),
    )
    report = run_cv(matrix, config)
    if args.json:
        out.write(report.to_json() + "\n")
    else:
        report.write_tsv(out)


COMMANDS = {"rank": _cmd_rank, "compare": _cmd_compare, "perms": _cmd_perms, "ci": _cmd_ci, "eval": _cmd_eval}


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        with _output(args.output) as out:
            COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PermutationLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LoadError, FeatureSkipped, ConfigError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
