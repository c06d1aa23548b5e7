"""CSV ingestion, model persistence, and small text utilities.

File formats (all CSV with a header row):

* reports:  ``report_id,<keyword...>`` -- one count column per keyword
* tweets:   ``user_id,tweet_id,<keyword...>``
* labels:   ``user_id,label`` with label 0 or 1
* scores:   ``user_id,score``

Count cells must be non-negative integers; a bad cell is reported with its
1-based data row and column name.  Models persist as a single versioned JSON
document whose payload is guarded by a SHA-256 checksum; coefficient floats
are written in their shortest round-tripping decimal form, so a load
reproduces them bit for bit.
"""

import csv
import hashlib
import json
import re
from collections import Counter

import numpy as np

from .errors import ModelFormatError, ParseError, ValidationError
from .model import Coefficients, Hyperparams, KeywordVocabulary, ReportSet, UserBag
from .solver import Model

__all__ = [
    "MODEL_FORMAT_VERSION",
    "read_report_vocabulary",
    "read_tweet_vocabulary",
    "load_reports",
    "load_bags",
    "load_unlabeled_bags",
    "load_labels",
    "load_scores",
    "save_reports",
    "save_bags",
    "save_scores",
    "vectorize_text",
    "prune_bag",
    "save_model",
    "load_model",
]

MODEL_FORMAT_VERSION = 1

_TOKEN = re.compile(r"[a-z0-9]+")


def _read_rows(path):
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise ParseError(path, 0, "<header>", "file is empty")
    return rows[0], rows[1:]


def _check_header(path, header, fixed, vocabulary):
    if header[: len(fixed)] != list(fixed):
        raise ParseError(path, 0, ",".join(fixed), f"header must start with {','.join(fixed)!r}")
    keywords = header[len(fixed) :]
    if vocabulary is None:
        return KeywordVocabulary(tuple(keywords))
    expected = list(vocabulary)
    if keywords != expected:
        missing = [kw for kw in expected if kw not in keywords]
        column = missing[0] if missing else keywords[0]
        raise ParseError(path, 0, column, "header keywords do not match the vocabulary")
    return vocabulary


def _parse_counts(path, row_number, cells, keywords):
    values = []
    for keyword, cell in zip(keywords, cells):
        try:
            value = int(cell)
        except ValueError:
            raise ParseError(path, row_number, keyword, f"expected an integer, got {cell!r}") from None
        if value < 0:
            raise ParseError(path, row_number, keyword, f"count cannot be negative, got {value}")
        values.append(value)
    return values


def read_report_vocabulary(path):
    """Vocabulary implied by a reports file's header."""
    header, _ = _read_rows(path)
    return _check_header(path, header, ("report_id",), None)


def read_tweet_vocabulary(path):
    """Vocabulary implied by a tweets file's header."""
    header, _ = _read_rows(path)
    return _check_header(path, header, ("user_id", "tweet_id"), None)


def load_reports(path, vocabulary=None):
    """Read report keyword counts; derives the vocabulary if none is given."""
    header, rows = _read_rows(path)
    vocabulary = _check_header(path, header, ("report_id",), vocabulary)
    width = len(vocabulary)
    counts = np.zeros((len(rows), width), dtype=np.int64)
    for i, row in enumerate(rows, start=1):
        if len(row) != width + 1:
            raise ParseError(path, i, "<row>", f"expected {width + 1} cells, got {len(row)}")
        counts[i - 1] = _parse_counts(path, i, row[1:], vocabulary.keywords)
    return ReportSet(counts)


def _read_tweet_groups(path, vocabulary):
    header, rows = _read_rows(path)
    vocabulary = _check_header(path, header, ("user_id", "tweet_id"), vocabulary)
    width = len(vocabulary)
    groups = {}
    for i, row in enumerate(rows, start=1):
        if len(row) != width + 2:
            raise ParseError(path, i, "<row>", f"expected {width + 2} cells, got {len(row)}")
        user_id = row[0]
        groups.setdefault(user_id, []).append(_parse_counts(path, i, row[2:], vocabulary.keywords))
    return groups, vocabulary


def load_labels(path):
    """Read ``user_id -> label``; duplicates and bad labels are rejected."""
    header, rows = _read_rows(path)
    if header != ["user_id", "label"]:
        raise ParseError(path, 0, "user_id,label", "header must be 'user_id,label'")
    labels = {}
    duplicates = []
    for i, row in enumerate(rows, start=1):
        if len(row) != 2:
            raise ParseError(path, i, "<row>", f"expected 2 cells, got {len(row)}")
        user_id, cell = row
        if cell not in ("0", "1"):
            raise ParseError(path, i, "label", f"label must be 0 or 1, got {cell!r}")
        if user_id in labels:
            duplicates.append(user_id)
        labels[user_id] = int(cell)
    if duplicates:
        raise ValidationError("duplicate label rows", sorted(set(duplicates)))
    return labels


def load_bags(tweets_path, labels_path, vocabulary=None):
    """Read labeled bags, grouped by user in first-appearance order.

    Every user in the tweets file needs exactly one label row and every
    labeled user needs at least one tweet; violations raise
    :class:`ValidationError` listing the offending user ids.
    """
    groups, vocabulary = _read_tweet_groups(tweets_path, vocabulary)
    labels = load_labels(labels_path)
    unlabeled = [uid for uid in groups if uid not in labels]
    if unlabeled:
        raise ValidationError("users with tweets but no label", sorted(unlabeled))
    missing = [uid for uid in labels if uid not in groups]
    if missing:
        raise ValidationError("labeled users with no tweets", sorted(missing))
    return tuple(
        UserBag(uid, np.array(rows, dtype=np.int64), labels[uid]) for uid, rows in groups.items()
    )


def load_unlabeled_bags(tweets_path, vocabulary=None):
    """Read bags for scoring; labels are fixed to 0 and never consulted."""
    groups, _ = _read_tweet_groups(tweets_path, vocabulary)
    return tuple(UserBag(uid, np.array(rows, dtype=np.int64), 0) for uid, rows in groups.items())


def load_scores(path):
    """Read ``user_id -> score`` pairs written by the predict command."""
    header, rows = _read_rows(path)
    if header != ["user_id", "score"]:
        raise ParseError(path, 0, "user_id,score", "header must be 'user_id,score'")
    scores = {}
    for i, row in enumerate(rows, start=1):
        if len(row) != 2:
            raise ParseError(path, i, "<row>", f"expected 2 cells, got {len(row)}")
        try:
            value = float(row[1])
        except ValueError:
            raise ParseError(path, i, "score", f"expected a number, got {row[1]!r}") from None
        if row[0] in scores:
            raise ValidationError("duplicate score rows", [row[0]])
        scores[row[0]] = value
    return scores


def save_reports(reports, vocabulary, path):
    """Write a reports CSV with generated report ids."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["report_id", *vocabulary.keywords])
        for i, row in enumerate(reports.counts):
            writer.writerow([f"r{i:05d}", *map(int, row)])


def save_bags(bags, vocabulary, tweets_path, labels_path):
    """Write tweets and labels CSVs for a sequence of bags."""
    with open(tweets_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["user_id", "tweet_id", *vocabulary.keywords])
        for bag in bags:
            for i, row in enumerate(bag.counts):
                writer.writerow([bag.user_id, f"t{i:04d}", *map(int, row)])
    with open(labels_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["user_id", "label"])
        for bag in bags:
            writer.writerow([bag.user_id, bag.label])


def save_scores(pairs, path):
    """Write ``(user_id, score)`` pairs as a scores CSV, order preserved."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["user_id", "score"])
        for user_id, score in pairs:
            writer.writerow([user_id, repr(float(score))])


def vectorize_text(text, vocabulary):
    """Count exact vocabulary tokens in lowercased text.

    Tokens are maximal ASCII alphanumeric runs, so punctuation and casing
    never matter.
    """
    counts = Counter(_TOKEN.findall(text.lower()))
    return np.array([counts.get(kw, 0) for kw in vocabulary.keywords], dtype=np.int64)


def prune_bag(bag):
    """Drop all-zero instances; keeps the first row if every row is zero."""
    keep = np.flatnonzero(bag.counts.any(axis=1))
    if keep.size == 0:
        keep = np.array([0])
    if keep.size == bag.n_instances:
        return bag
    return UserBag(bag.user_id, bag.counts[keep], bag.label)


def _payload(model):
    return {
        "version": MODEL_FORMAT_VERSION,
        "vocabulary": list(model.vocabulary.keywords),
        "beta": [float(v) for v in model.coefficients.values],
        "hyperparams": {
            "lambda1": model.hyper.lambda1,
            "lambda2": model.hyper.lambda2,
            "rho0": model.hyper.rho0,
            "partitions": model.hyper.partitions,
            "eta": model.hyper.eta,
            "max_outer": model.hyper.max_outer,
            "max_fista": model.hyper.max_fista,
            "max_ccp": model.hyper.max_ccp,
            "tol_abs": model.hyper.tol_abs,
            "tol_rel": model.hyper.tol_rel,
            "adaptive_rho": model.hyper.adaptive_rho,
            "seed": model.hyper.seed,
        },
        "trace_summary": model.trace_summary,
    }


def _digest(payload):
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def save_model(model, path):
    """Persist a model as checksummed JSON."""
    payload = _payload(model)
    document = dict(payload, checksum=_digest(payload))
    with open(path, "w") as handle:
        json.dump(document, handle, indent=2)
        handle.write("\n")


def load_model(path):
    """Load a model saved by :func:`save_model`, verifying its integrity."""
    try:
        with open(path) as handle:
            document = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(document, dict) or "checksum" not in document:
        raise ModelFormatError(f"{path}: missing checksum")
    stored = document.pop("checksum")
    version = document.get("version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported model version {version!r}")
    missing = {"vocabulary", "beta", "hyperparams", "trace_summary"} - set(document)
    if missing:
        raise ModelFormatError(f"{path}: missing fields {sorted(missing)}")
    if stored != _digest(document):
        raise ModelFormatError(f"{path}: checksum mismatch; file corrupted or edited")
    return Model(
        KeywordVocabulary(tuple(document["vocabulary"])),
        Coefficients(np.array(document["beta"], dtype=float)),
        Hyperparams(**document["hyperparams"]),
        document["trace_summary"],
    )
