"""Command-line interface: train, predict, evaluate, synth.

Exit codes: 0 on success, 1 on runtime or data errors (reported as one
``error: <Type>: <message>`` line on stderr), 2 on usage errors.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import data_io, metrics, synth
from .errors import (
    ConfigError,
    DataFormatError,
    DimensionError,
    DivergenceError,
    EmptyBagError,
    UndefinedMetricError,
    ValidationError,
)
from .model import Dataset, Hyperparams, ReportSet
from .solver import fit, predict

_ERRORS = (
    ConfigError,
    DataFormatError,
    DimensionError,
    DivergenceError,
    EmptyBagError,
    FileNotFoundError,
    OSError,
)


def _fail(exc):
    message = " ".join(str(exc).split())  # keep the line single-line and tidy
    print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)
    return 1


def _add_hyper_flags(parser):
    parser.add_argument("--lambda1", type=float, default=0.01, help="l1 penalty weight")
    parser.add_argument("--lambda2", type=float, default=1.0, help="domain-distance weight")
    parser.add_argument("--rho", type=float, default=10.0, help="starting quadratic penalty")
    parser.add_argument("--partitions", type=int, default=100, help="chunk count for the domain distance")
    parser.add_argument("--eta", type=float, default=1.0, help="score-block gradient step")
    parser.add_argument("--max-iter", type=int, default=20, help="outer iterations")
    parser.add_argument("--tol-abs", type=float, default=1e-4, help="absolute residual tolerance")
    parser.add_argument("--tol-rel", type=float, default=1e-3, help="relative residual tolerance")
    parser.add_argument(
        "--adaptive-rho",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="rebalance the penalty from the residual ratio",
    )
    parser.add_argument("--seed", type=int, default=0, help="seed for every random choice")


def _write_trace(trace, path):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["k", "r_primal", "s_dual", "rho", "objective", "seconds"])
        for rec in trace.records:
            writer.writerow(
                [rec.k, repr(rec.r_primal), repr(rec.s_dual), repr(rec.rho), repr(rec.objective), repr(rec.seconds)]
            )


def _read_user_list(path):
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows or rows[0][:1] != ["user_id"]:
        raise DataFormatError(f"{path}: expected a CSV with a 'user_id' header")
    return [row[0] for row in rows[1:] if row]


def _cmd_train(args):
    if args.reports is not None:
        vocabulary = data_io.read_report_vocabulary(args.reports)
        reports = data_io.load_reports(args.reports, vocabulary)
    else:
        vocabulary = data_io.read_tweet_vocabulary(args.tweets)
        reports = ReportSet(np.zeros((0, len(vocabulary)), dtype=np.int64))
    bags = data_io.load_bags(args.tweets, args.labels, vocabulary)
    bags = tuple(data_io.prune_bag(bag) for bag in bags)
    holdout_ids = []
    if args.holdout_fraction > 0:
        rng = np.random.default_rng(args.seed)
        order = rng.permutation(len(bags))
        n_holdout = round(args.holdout_fraction * len(bags))
        held = set(map(int, order[:n_holdout]))
        holdout_ids = sorted(bags[i].user_id for i in held)
        bags = tuple(bag for i, bag in enumerate(bags) if i not in held)
        if not bags:
            raise ConfigError("holdout fraction leaves no users to train on")
    hyper = Hyperparams(
        lambda1=args.lambda1,
        lambda2=args.lambda2,
        rho0=args.rho,
        partitions=args.partitions,
        eta=args.eta,
        max_outer=args.max_iter,
        tol_abs=args.tol_abs,
        tol_rel=args.tol_rel,
        adaptive_rho=args.adaptive_rho,
        seed=args.seed,
    )
    dataset = Dataset(vocabulary, bags, reports)
    model, trace = fit(dataset, hyper, threads=args.threads)
    data_io.save_model(model, args.out)
    trace_path = args.trace if args.trace else str(Path(args.out).parent / "trace.csv")
    _write_trace(trace, trace_path)
    if args.holdout_fraction > 0:
        holdout_path = args.holdout_out if args.holdout_out else str(Path(args.out).parent / "holdout_users.csv")
        with open(holdout_path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["user_id"])
            for user_id in holdout_ids:
                writer.writerow([user_id])
    summary = model.trace_summary
    print(
        f"trained on {len(bags)} users in {summary['iterations']} iterations "
        f"(converged={summary['converged']}, r_primal={summary.get('r_primal', float('nan')):.3e})"
    )
    return 0


def _cmd_predict(args):
    model = data_io.load_model(args.model)
    bags = data_io.load_unlabeled_bags(args.tweets, model.vocabulary)
    pairs = sorted((bag.user_id, predict(model, bag)) for bag in bags)
    data_io.save_scores(pairs, args.out)
    print(f"scored {len(pairs)} users")
    return 0


def _cmd_evaluate(args):
    scores = data_io.load_scores(args.scores)
    labels = data_io.load_labels(args.labels)
    if args.users is not None:
        wanted = _read_user_list(args.users)
        missing = sorted(set(wanted) - (set(scores) & set(labels)))
        if missing:
            raise ValidationError("requested users missing a score or label", missing)
        user_ids = sorted(set(wanted))
    else:
        only_scores = sorted(set(scores) - set(labels))
        only_labels = sorted(set(labels) - set(scores))
        if only_scores or only_labels:
            raise ValidationError("scores and labels cover different users", only_scores + only_labels)
        user_ids = sorted(scores)
    scored = [metrics.ScoredLabel(scores[uid], labels[uid]) for uid in user_ids]
    at_threshold = metrics.threshold_metrics(scored, args.threshold)
    document = {
        "threshold": args.threshold,
        "acc": at_threshold.accuracy,
        "pr": at_threshold.precision,
        "re": at_threshold.recall,
        "fs": at_threshold.f_score,
        "auc": None,
        "aupr": None,
    }
    out_dir = Path(args.out).parent
    ranking_error = None
    try:
        auc, roc_points = metrics.roc_auc(scored)
        aupr, pr_points = metrics.pr_aupr(scored)
    except UndefinedMetricError as exc:  # single-class labels: keep the threshold metrics
        ranking_error = exc
    else:
        document["auc"] = auc
        document["aupr"] = aupr
        metrics.write_curve_points(roc_points, args.roc_out or str(out_dir / "roc_points.csv"))
        metrics.write_curve_points(pr_points, args.pr_out or str(out_dir / "pr_points.csv"))
    with open(args.out, "w") as handle:
        json.dump(document, handle, indent=2)
        handle.write("\n")
    if ranking_error is not None:
        return _fail(ranking_error)
    print(json.dumps(document))
    return 0


def _cmd_synth(args):
    config = synth.SynthConfig(
        n_users=args.users,
        positive_fraction=args.positive_fraction,
        tweets_per_user=(args.tweets_min, args.tweets_max),
        n_keywords=args.keywords,
        n_signal=args.signal_keywords,
        n_reports=args.reports,
        background_rate=args.background_rate,
        signal_rate=args.signal_rate,
        report_shift=args.report_shift,
        seed=args.seed,
    )
    dataset, truth, adverse_index = synth.generate(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_io.save_reports(dataset.reports, dataset.vocabulary, str(out_dir / "reports.csv"))
    data_io.save_bags(dataset.bags, dataset.vocabulary, str(out_dir / "tweets.csv"), str(out_dir / "labels.csv"))
    with open(out_dir / "ground_truth.json", "w") as handle:
        json.dump(
            {
                "beta": [float(v) for v in truth.values],
                "signal_keywords": list(dataset.vocabulary.keywords[: config.n_signal]),
                "adverse_tweet_index": adverse_index,
            },
            handle,
            indent=2,
        )
        handle.write("\n")
    print(f"wrote {dataset.n_users} users, {dataset.reports.n_reports} reports to {out_dir}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="miadapt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="fit a model from reports, tweets, and labels")
    train.add_argument("--reports", help="reports CSV; omit to train without a source domain")
    train.add_argument("--tweets", required=True, help="tweets CSV")
    train.add_argument("--labels", required=True, help="labels CSV")
    train.add_argument("--out", required=True, help="output model JSON path")
    train.add_argument("--trace", help="trace CSV path (default: trace.csv beside --out)")
    _add_hyper_flags(train)
    train.add_argument("--threads", type=int, default=1, help="worker threads for weight reductions")
    train.add_argument(
        "--holdout-fraction",
        type=float,
        default=0.0,
        help="fraction of users excluded from training, chosen by --seed",
    )
    train.add_argument("--holdout-out", help="where to write held-out user ids (default beside --out)")
    train.set_defaults(func=_cmd_train)

    pred = sub.add_parser("predict", help="score users with a trained model")
    pred.add_argument("--model", required=True, help="model JSON path")
    pred.add_argument("--tweets", required=True, help="tweets CSV")
    pred.add_argument("--out", required=True, help="output scores CSV path")
    pred.set_defaults(func=_cmd_predict)

    ev = sub.add_parser("evaluate", help="compute metrics from scores and labels")
    ev.add_argument("--scores", required=True, help="scores CSV from predict")
    ev.add_argument("--labels", required=True, help="labels CSV")
    ev.add_argument("--out", required=True, help="output metrics JSON path")
    ev.add_argument("--roc-out", help="ROC points CSV (default beside --out)")
    ev.add_argument("--pr-out", help="PR points CSV (default beside --out)")
    ev.add_argument("--threshold", type=float, default=0.5, help="decision threshold")
    ev.add_argument("--users", help="CSV of user ids to restrict the evaluation to")
    ev.set_defaults(func=_cmd_evaluate)

    sy = sub.add_parser("synth", help="generate a synthetic corpus with ground truth")
    sy.add_argument("--out-dir", required=True, help="directory for the generated CSVs")
    sy.add_argument("--users", type=int, default=1000)
    sy.add_argument("--positive-fraction", type=float, default=0.36)
    sy.add_argument("--tweets-min", type=int, default=3)
    sy.add_argument("--tweets-max", type=int, default=8)
    sy.add_argument("--keywords", type=int, default=50)
    sy.add_argument("--signal-keywords", type=int, default=10)
    sy.add_argument("--reports", type=int, default=2000)
    sy.add_argument("--background-rate", type=float, default=0.3)
    sy.add_argument("--signal-rate", type=float, default=3.0)
    sy.add_argument("--report-shift", type=float, default=0.5)
    sy.add_argument("--seed", type=int, default=0)
    sy.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _ERRORS as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
