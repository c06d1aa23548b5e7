"""Domain distance between formal reports and selected user instances.

With the negated-squared-distance kernel, the squared population discrepancy
between the report rows and the representative (top-scoring) instance of each
positive user collapses to a diagonal quadratic in the keyword weights:

    distance(w) = sum_j (2 * a[j] - b[j]) * w[j] ** 2

where ``a[j]`` is the mean squared report/instance difference on keyword j
(cross-domain spread) and ``b[j]`` the mean squared instance/instance
difference (within-domain spread).  An additive constant depending only on
the reports is dropped, so the value can in principle be negative.

Both populations can be split into aligned chunks: chunk i of the reports is
compared only with chunk i of the users, each chunk contribution is
normalized by its own pair count, and the contributions are averaged.  This
cuts the pairwise work by roughly the chunk count while keeping the
magnitude comparable; one chunk reproduces the unchunked value exactly.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .model import select_representative

__all__ = [
    "MmdWeights",
    "PartitionPlan",
    "partition",
    "representative_rows",
    "cross_domain_weights",
    "within_domain_weights",
    "mmd_weights",
    "mmd_distance",
    "brute_force_mmd",
]


@dataclass(frozen=True)
class MmdWeights:
    """Per-keyword quadratic weights plus the population sizes behind them."""

    a: np.ndarray
    b: np.ndarray
    n_positive: int
    n_reports: int

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).copy()
        b = np.asarray(self.b, dtype=float).copy()
        if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
            raise DimensionError(f"weight vectors must share one shape, got {a.shape} and {b.shape}")
        if a.size and (a.min() < 0 or b.min() < 0):
            raise ValueError("spread weights are sums of squares and cannot be negative")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def empty(cls, width):
        return cls(np.zeros(width), np.zeros(width), 0, 0)


@dataclass(frozen=True)
class PartitionPlan:
    """Aligned round-robin chunking of report rows and positive-user rows.

    Chunks hold sorted positional indices (into the report matrix and into
    the positive-user ordering).  Chunk i on one side pairs with chunk i on
    the other; a pair with an empty side contributes nothing.
    """

    report_chunks: tuple
    user_chunks: tuple
    requested: int

    def __post_init__(self):
        object.__setattr__(self, "report_chunks", tuple(np.asarray(c, dtype=np.intp) for c in self.report_chunks))
        object.__setattr__(self, "user_chunks", tuple(np.asarray(c, dtype=np.intp) for c in self.user_chunks))


def partition(n_reports, positive_user_ids, chunks, seed):
    """Deterministically chunk both populations for the paired distance.

    A seeded shuffle is dealt round-robin into ``min(chunks, max(n_reports,
    n_positive))`` chunks per side, then each chunk is sorted.  Chunk sizes
    within a side differ by at most one; every index appears exactly once.
    """
    if chunks < 1:
        raise ConfigError(f"chunk count must be >= 1, got {chunks}")
    if n_reports < 0:
        raise ConfigError(f"report count must be >= 0, got {n_reports}")
    n_positive = len(positive_user_ids)
    n_chunks = min(chunks, max(n_reports, n_positive))
    rng = np.random.default_rng(seed)
    report_order = rng.permutation(n_reports)
    user_order = rng.permutation(n_positive)
    report_chunks = tuple(np.sort(report_order[i::n_chunks]) for i in range(n_chunks))
    user_chunks = tuple(np.sort(user_order[i::n_chunks]) for i in range(n_chunks))
    return PartitionPlan(report_chunks, user_chunks, chunks)


def representative_rows(data, coef):
    """Count rows of each positive bag's top-scoring instance, in bag order."""
    width = len(data.vocabulary)
    rows = []
    for bag in data.bags:
        if bag.label != 1:
            continue
        scores = coef.intercept + bag.counts @ coef.keyword_weights
        rows.append(bag.counts[select_representative(scores)])
    if not rows:
        return np.zeros((0, width), dtype=np.int64)
    return np.array(rows, dtype=np.int64)


def _chunk_cross(reports, selected, rep_idx, usr_idx):
    # n*sum(R^2) + r*sum(d^2) - 2*sum(R)*sum(d), per keyword; exact for
    # integer counts, so the result is invariant to row order.
    rep = reports[rep_idx].astype(float)
    sel = selected[usr_idx].astype(float)
    n_rep, n_sel = rep.shape[0], sel.shape[0]
    total = (
        n_sel * np.sum(rep * rep, axis=0)
        + n_rep * np.sum(sel * sel, axis=0)
        - 2.0 * np.sum(rep, axis=0) * np.sum(sel, axis=0)
    )
    return total / (n_rep * n_sel)


def _chunk_within(selected, usr_idx):
    # sum over ordered pairs (u1, u2) of (d1 - d2)^2 equals
    # 2n*sum(d^2) - 2*sum(d)^2, per keyword.
    sel = selected[usr_idx].astype(float)
    n_sel = sel.shape[0]
    total = 2.0 * n_sel * np.sum(sel * sel, axis=0) - 2.0 * np.sum(sel, axis=0) ** 2
    return total / (n_sel * n_sel)


def _map_chunks(worker, jobs, threads):
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, jobs))
    return [worker(job) for job in jobs]


def cross_domain_weights(reports, selected, plan, threads=1):
    """Mean squared report/instance difference per keyword, chunk-averaged.

    Every chunk pair with both sides non-empty contributes its own
    pair-normalized mean; the contributions are averaged in chunk order so
    the result does not depend on ``threads``.  Returns zeros when either
    population is empty.
    """
    rep = reports.counts
    sel = np.asarray(selected)
    if rep.shape[1] != sel.shape[1]:
        raise DimensionError(f"reports have {rep.shape[1]} keyword columns, instances have {sel.shape[1]}")
    width = rep.shape[1]
    if rep.shape[0] == 0 or sel.shape[0] == 0:
        return np.zeros(width)
    pairs = [
        (r_idx, u_idx)
        for r_idx, u_idx in zip(plan.report_chunks, plan.user_chunks)
        if len(r_idx) and len(u_idx)
    ]
    if not pairs:
        return np.zeros(width)
    parts = _map_chunks(lambda p: _chunk_cross(rep, sel, p[0], p[1]), pairs, threads)
    return np.sum(parts, axis=0) / len(parts)


def within_domain_weights(selected, plan, threads=1):
    """Mean squared instance/instance difference per keyword, chunk-averaged.

    Uses the linear-time identity ``2n*sum(d^2) - 2*sum(d)^2`` per chunk
    instead of enumerating pairs.  Returns zeros when there are no selected
    instances; a single-instance chunk contributes exact zeros.
    """
    sel = np.asarray(selected)
    width = sel.shape[1]
    if sel.shape[0] == 0:
        return np.zeros(width)
    chunks = [u_idx for u_idx in plan.user_chunks if len(u_idx)]
    if not chunks:
        return np.zeros(width)
    parts = _map_chunks(lambda c: _chunk_within(sel, c), chunks, threads)
    return np.sum(parts, axis=0) / len(chunks)


def mmd_weights(reports, selected, plan, threads=1):
    """Bundle both weight vectors, applying the empty-domain rule.

    If either population is empty the whole distance is defined to be zero,
    so both vectors come back as zeros rather than only the cross term.
    """
    sel = np.asarray(selected)
    n_positive = sel.shape[0]
    n_reports = reports.n_reports
    if n_reports == 0 or n_positive == 0:
        return MmdWeights.empty(reports.counts.shape[1])
    return MmdWeights(
        cross_domain_weights(reports, sel, plan, threads=threads),
        within_domain_weights(sel, plan, threads=threads),
        n_positive,
        n_reports,
    )


def mmd_distance(coef, weights):
    """Evaluate ``sum_j (2a[j] - b[j]) * w[j]**2`` on the keyword weights."""
    kw = coef.keyword_weights
    if weights.a.shape[0] != kw.shape[0]:
        raise DimensionError(
            f"weights cover {weights.a.shape[0]} keywords, coefficients cover {kw.shape[0]}"
        )
    return float(np.sum((2.0 * weights.a - weights.b) * kw * kw))


def brute_force_mmd(reports, selected, coef):
    """Literal pairwise evaluation of the unchunked distance (test oracle).

    Plain Python loops over every report/instance and instance/instance
    pair, sharing no code with the chunked path.  Quadratic in the
    population sizes; keep them small.
    """
    rep = np.asarray(reports.counts, dtype=float)
    sel = np.asarray(selected, dtype=float)
    kw = [float(v) for v in coef.keyword_weights]
    n_rep = rep.shape[0]
    n_sel = sel.shape[0]
    if n_rep == 0 or n_sel == 0:
        return 0.0
    if rep.shape[1] != len(kw) or sel.shape[1] != len(kw):
        raise DimensionError("reports, instances, and coefficients must agree on keyword count")
    cross = 0.0
    for i in range(n_rep):
        for u in range(n_sel):
            acc = 0.0
            for j in range(len(kw)):
                diff = sel[u, j] - rep[i, j]
                acc += diff * diff * kw[j] * kw[j]
            cross += acc
    within = 0.0
    for u1 in range(n_sel):
        for u2 in range(n_sel):
            acc = 0.0
            for j in range(len(kw)):
                diff = sel[u1, j] - sel[u2, j]
                acc += diff * diff * kw[j] * kw[j]
            within += acc
    return 2.0 * cross / (n_rep * n_sel) - within / (n_sel * n_sel)
