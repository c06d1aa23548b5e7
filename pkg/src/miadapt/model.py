"""Core data model and the max-rule multi-instance logistic objective.

A *user* is a bag of instances, one row of keyword counts per message.  Each
instance gets a logistic score from a shared coefficient vector (intercept
first, one weight per keyword); the bag's probability of being positive is
the logistic of the largest instance score.  The training objective sums the
resulting log loss over users and adds an l1 penalty plus a weighted
quadratic domain distance whose per-keyword weights come from
:mod:`miadapt.mmd`.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    DivergenceError,
    EmptyBagError,
    StabilityWarning,
)

__all__ = [
    "KeywordVocabulary",
    "UserBag",
    "ReportSet",
    "Coefficients",
    "Hyperparams",
    "Dataset",
    "sigmoid",
    "build_design_matrix",
    "instance_scores",
    "select_representative",
    "user_probability",
    "user_loss",
    "full_objective",
]


def sigmoid(z):
    """Logistic function, elementwise, stable for large |z|."""
    arr = np.asarray(z, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    expz = np.exp(arr[~pos])
    out[~pos] = expz / (1.0 + expz)
    return float(out[0]) if scalar else out


def _readonly_int_matrix(values, name):
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a 2-d matrix, got shape {arr.shape}")
    if arr.size and not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValueError(f"{name} entries must be integers")
    if arr.size and arr.min() < 0:
        raise ValueError(f"{name} entries must be non-negative")
    arr = arr.astype(np.int64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class KeywordVocabulary:
    """Ordered, distinct lowercase keywords; positions index count columns."""

    keywords: tuple

    def __post_init__(self):
        kws = tuple(self.keywords)
        if not kws:
            raise ConfigError("vocabulary must contain at least one keyword")
        if len(set(kws)) != len(kws):
            raise ConfigError("vocabulary keywords must be distinct")
        for kw in kws:
            if not isinstance(kw, str) or not kw or kw != kw.lower():
                raise ConfigError(f"keyword {kw!r} must be a non-empty lowercase string")
        object.__setattr__(self, "keywords", kws)

    def __len__(self):
        return len(self.keywords)

    def __iter__(self):
        return iter(self.keywords)


@dataclass(frozen=True)
class UserBag:
    """One user's messages as a non-empty matrix of keyword counts."""

    user_id: str
    counts: np.ndarray
    label: int

    def __post_init__(self):
        arr = _readonly_int_matrix(self.counts, f"bag {self.user_id!r} counts")
        if arr.shape[0] < 1:
            raise EmptyBagError(f"bag {self.user_id!r} has no instances")
        if self.label not in (0, 1):
            raise ValueError(f"bag {self.user_id!r} label must be 0 or 1, got {self.label}")
        object.__setattr__(self, "counts", arr)

    @property
    def n_instances(self):
        return self.counts.shape[0]


@dataclass(frozen=True)
class ReportSet:
    """Keyword counts of the formal source-domain documents (possibly none)."""

    counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "counts", _readonly_int_matrix(self.counts, "report counts"))

    @property
    def n_reports(self):
        return self.counts.shape[0]


@dataclass(frozen=True)
class Coefficients:
    """Intercept-first coefficient vector of length ``1 + n_keywords``."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float).copy()
        if arr.ndim != 1 or arr.shape[0] < 2:
            raise DimensionError(f"coefficients must be a vector of length >= 2, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficients must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def intercept(self):
        return float(self.values[0])

    @property
    def keyword_weights(self):
        return self.values[1:]

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class Hyperparams:
    """Solver settings.

    ``eta`` is the fixed gradient step of the score-block inner solver; the
    coefficient-block step is derived from a Lipschitz estimate each outer
    iteration and needs no knob.  ``rho0`` is the starting quadratic penalty;
    with ``adaptive_rho`` it is rebalanced between iterations.
    """

    lambda1: float = 0.01
    lambda2: float = 1.0
    rho0: float = 10.0
    partitions: int = 100
    eta: float = 1.0
    max_outer: int = 20
    max_fista: int = 5000
    max_ccp: int = 50
    tol_abs: float = 1e-4
    tol_rel: float = 1e-3
    adaptive_rho: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.lambda1 > 0:
            raise ConfigError(f"lambda1 must be > 0, got {self.lambda1}")
        if self.lambda2 < 0:
            raise ConfigError(f"lambda2 must be >= 0, got {self.lambda2}")
        if not self.rho0 > 0:
            raise ConfigError(f"rho0 must be > 0, got {self.rho0}")
        if self.partitions < 1:
            raise ConfigError(f"partitions must be >= 1, got {self.partitions}")
        if not self.eta > 0:
            raise ConfigError(f"eta must be > 0, got {self.eta}")
        for name in ("max_outer", "max_fista", "max_ccp"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.tol_abs > 0 or not self.tol_rel > 0:
            raise ConfigError("tol_abs and tol_rel must be > 0")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if self.lambda2 > 0 and self.rho0 < 10.0 * self.lambda2:
            warnings.warn(
                f"rho0={self.rho0} is below 10*lambda2={10.0 * self.lambda2}; "
                "the coefficient subproblem may be poorly conditioned",
                StabilityWarning,
                stacklevel=2,
            )


@dataclass(frozen=True)
class Dataset:
    """Vocabulary, user bags, and source-domain reports, width-checked."""

    vocabulary: KeywordVocabulary
    bags: tuple
    reports: ReportSet = field(default=None)

    def __post_init__(self):
        bags = tuple(self.bags)
        width = len(self.vocabulary)
        reports = self.reports if self.reports is not None else ReportSet(np.zeros((0, width), dtype=np.int64))
        seen = set()
        for bag in bags:
            if bag.counts.shape[1] != width:
                raise DimensionError(
                    f"bag {bag.user_id!r} has {bag.counts.shape[1]} keyword columns, vocabulary has {width}"
                )
            if bag.user_id in seen:
                raise ValueError(f"duplicate user id {bag.user_id!r}")
            seen.add(bag.user_id)
        if reports.counts.shape[1] != width:
            raise DimensionError(
                f"reports have {reports.counts.shape[1]} keyword columns, vocabulary has {width}"
            )
        object.__setattr__(self, "bags", bags)
        object.__setattr__(self, "reports", reports)

    @property
    def n_users(self):
        return len(self.bags)

    def positive_indices(self):
        """Positions of positive bags, in bag order."""
        return tuple(i for i, bag in enumerate(self.bags) if bag.label == 1)


def build_design_matrix(bag, vocabulary):
    """Prepend the all-ones intercept column to a bag's count rows.

    Returns a float matrix of shape ``(n_instances, 1 + len(vocabulary))``.
    Raises :class:`DimensionError` if the bag does not conform to the
    vocabulary width.
    """
    width = len(vocabulary)
    if bag.counts.shape[1] != width:
        raise DimensionError(
            f"bag {bag.user_id!r} has {bag.counts.shape[1]} keyword columns, vocabulary has {width}"
        )
    design = np.empty((bag.n_instances, width + 1), dtype=float)
    design[:, 0] = 1.0
    design[:, 1:] = bag.counts
    return design


def instance_scores(design, coef):
    """Linear scores ``design @ coef`` for one bag's design matrix."""
    design = np.asarray(design, dtype=float)
    if design.ndim != 2 or design.shape[1] != len(coef):
        raise DimensionError(
            f"design matrix has shape {design.shape}, coefficients have length {len(coef)}"
        )
    return design @ coef.values


def select_representative(scores):
    """Index of the highest score; ties resolve to the lowest index."""
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise EmptyBagError("cannot select a representative from an empty score vector")
    return int(np.argmax(scores))


def _bag_scores(coef, bag):
    if bag.counts.shape[1] + 1 != len(coef):
        raise DimensionError(
            f"bag {bag.user_id!r} has {bag.counts.shape[1]} keyword columns, "
            f"coefficients expect {len(coef) - 1}"
        )
    return coef.intercept + bag.counts @ coef.keyword_weights


def user_probability(coef, bag):
    """Probability the bag is positive: logistic of its top instance score."""
    scores = _bag_scores(coef, bag)
    return float(sigmoid(scores[select_representative(scores)]))


def user_loss(coef, bag):
    """Log loss of the bag under the max rule.

    Evaluated as ``log(1 + exp(s)) - label * s`` at the representative score
    ``s``, which stays finite for scores out to several hundred in magnitude.
    """
    scores = _bag_scores(coef, bag)
    s = scores[select_representative(scores)]
    return float(np.logaddexp(0.0, s) - bag.label * s)


def full_objective(coef, data, weights, hyper, rep_index=None):
    """Training objective: summed bag losses + l1 penalty + domain distance.

    Parameters
    ----------
    coef : Coefficients
    data : Dataset
    weights : MmdWeights or None
        Per-keyword quadratic weights computed against the current
        representative instances (the caller keeps these consistent).
        ``None`` drops the distance term, as does ``hyper.lambda2 == 0``.
    hyper : Hyperparams
    rep_index : mapping, optional
        ``user_id -> instance index`` overriding the per-bag argmax.  Fixing
        the representatives makes the ``lambda2 == 0`` objective convex.

    Raises
    ------
    DivergenceError
        If the value is not finite.
    """
    total = 0.0
    if rep_index is None:
        for bag in data.bags:
            total += user_loss(coef, bag)
    else:
        for bag in data.bags:
            scores = _bag_scores(coef, bag)
            s = scores[rep_index[bag.user_id]]
            total += float(np.logaddexp(0.0, s) - bag.label * s)
    total += hyper.lambda1 * float(np.sum(np.abs(coef.values)))
    if weights is not None and hyper.lambda2 > 0:
        from .mmd import mmd_distance  # deferred: mmd imports this module

        total += hyper.lambda2 * mmd_distance(coef, weights)
    if not np.isfinite(total):
        raise DivergenceError("objective is not finite; consider a larger rho0")
    return total
