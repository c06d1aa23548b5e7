"""Alternating-direction solver for the adapted multi-instance objective.

The objective couples every instance score through the per-bag max rule, so
it is split: auxiliary score variables, one per instance, are constrained to
equal the linear scores, and an augmented-Lagrangian outer loop alternates

    1. refresh each bag's representative instance and the domain weights,
    2. optionally rebalance the quadratic penalty ``rho``,
    3. score block  -- representative scores each solve a one-dimensional
       penalized logistic problem by an accelerated proximal loop; all other
       scores have a closed form,
    4. coefficient block -- the within-domain spread enters negated, so the
       subproblem is solved as a difference of convex functions: linearize
       the concave part, solve the remaining l1 problem by an accelerated
       proximal loop, repeat,
    5. dual ascent and residual bookkeeping.

The accelerated loops share one momentum schedule, started at zero, whose
first two steps coincide by construction; convergence checks therefore only
begin at the third step.
"""

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, DivergenceError, StabilityWarning
from .mmd import MmdWeights, mmd_weights, partition
from .model import (
    Coefficients,
    Hyperparams,
    build_design_matrix,
    full_objective,
    select_representative,
    sigmoid,
    user_probability,
)

__all__ = [
    "AdmmState",
    "ConcaveLinearization",
    "CoefficientUpdate",
    "TraceRecord",
    "SolveTrace",
    "Model",
    "soft_threshold",
    "fista_momentum",
    "log_loss_gradient",
    "score_prox_step",
    "update_scores",
    "smooth_gradient",
    "linearize_concave",
    "update_coefficients",
    "update_duals",
    "compute_residuals",
    "adapt_penalty",
    "fit",
    "predict",
]

SCORE_TOL = 1e-8  # score-block iterate change
COEF_TOL = 1e-8  # coefficient-block inner iterate change (sup norm)
CCP_TOL = 1e-6  # outer difference-of-convex iterate change (sup norm)
_DIVERGENCE_CAP = 1e8
_RISE_TOL = 1e-6
_RISE_LIMIT = 3
_POWER_STEPS = 50
_LIPSCHITZ_MARGIN = 1.01  # power iteration approaches the top eigenvalue from below


def soft_threshold(values, kappa):
    """Shrink toward zero by ``kappa``, elementwise; the l1 proximal map."""
    if kappa < 0:
        raise ValueError(f"threshold must be >= 0, got {kappa}")
    arr = np.asarray(values, dtype=float)
    out = np.maximum(arr - kappa, 0.0) - np.maximum(-arr - kappa, 0.0)
    return float(out) if out.ndim == 0 else out


def fista_momentum(lam):
    """Advance the momentum schedule: returns ``(lam_next, gamma)``.

    ``gamma`` weights the previous proximal point when forming the next
    iterate; it is 1 then 0 on the first two calls from ``lam = 0`` and
    negative (extrapolating) afterwards.
    """
    lam_next = (1.0 + math.sqrt(1.0 + 4.0 * lam * lam)) / 2.0
    return lam_next, (1.0 - lam) / lam_next


def log_loss_gradient(score, label):
    """Derivative of the instance log loss with respect to its score."""
    return sigmoid(score) - label


def score_prox_step(score, target, rho, eta, label):
    """One proximal step of the representative-score problem.

    Minimizes the quadratic model of the logistic term around ``score`` plus
    the exact penalty ``rho/2 * (s - target)**2``; the minimizer is closed
    form.  Written with ``eta`` multiplied through so tiny steps stay
    well-scaled.
    """
    grad = log_loss_gradient(score, label)
    return (eta * rho * target + score - eta * grad) / (eta * rho + 1.0)


@dataclass
class AdmmState:
    """Mutable optimizer state: auxiliary scores, duals, penalty, selections."""

    scores: list
    duals: list
    rho: float
    rep_index: dict
    k: int = 0
    r_primal: float = math.inf
    s_dual: float = math.inf


@dataclass(frozen=True)
class ConcaveLinearization:
    """Tangent plane of the concave (negated within-domain) term."""

    anchor: np.ndarray
    value: float
    gradient: np.ndarray

    def evaluate(self, values):
        return self.value + float(self.gradient @ (np.asarray(values, dtype=float) - self.anchor))


@dataclass(frozen=True)
class CoefficientUpdate:
    """Result of one coefficient-block solve.

    ``objectives`` records the difference-of-convex objective before the
    first step and after each step; it should be non-increasing.
    """

    coefficients: Coefficients
    objectives: tuple
    inner_capped: bool
    outer_capped: bool


@dataclass(frozen=True)
class TraceRecord:
    k: int
    r_primal: float
    s_dual: float
    rho: float
    objective: float
    seconds: float
    inner_capped: bool = False


@dataclass
class SolveTrace:
    """Per-outer-iteration history of one :func:`fit` call."""

    records: list = field(default_factory=list)
    converged: bool = False

    def summary(self):
        """Machine-readable digest, free of wall-clock fields."""
        if not self.records:
            return {"iterations": 0, "converged": False}
        last = self.records[-1]
        return {
            "iterations": len(self.records),
            "converged": self.converged,
            "r_primal": last.r_primal,
            "s_dual": last.s_dual,
            "objective": last.objective,
            "rho": last.rho,
            "inner_caps": sum(1 for rec in self.records if rec.inner_capped),
        }


@dataclass(frozen=True)
class Model:
    """Trained classifier: vocabulary, coefficients, and provenance."""

    vocabulary: object
    coefficients: Coefficients
    hyper: Hyperparams
    trace_summary: dict


def _stacked_design(data):
    """All bags' design rows stacked, with bag boundaries and labels."""
    width = len(data.vocabulary)
    sizes = [bag.n_instances for bag in data.bags]
    offsets = np.zeros(len(sizes) + 1, dtype=np.intp)
    np.cumsum(sizes, out=offsets[1:])
    design = np.empty((int(offsets[-1]), width + 1), dtype=float)
    for bag, lo, hi in zip(data.bags, offsets[:-1], offsets[1:]):
        design[lo:hi] = build_design_matrix(bag, data.vocabulary)
    labels = np.array([bag.label for bag in data.bags], dtype=float)
    return design, offsets, labels


def _rep_rows(state, data, offsets):
    rows = np.empty(len(data.bags), dtype=np.intp)
    for u, bag in enumerate(data.bags):
        idx = state.rep_index[bag.user_id]
        if not 0 <= idx < bag.n_instances:
            raise DimensionError(f"representative index {idx} out of range for bag {bag.user_id!r}")
        rows[u] = offsets[u] + idx
    return rows


def _split_by_bag(stacked, offsets):
    return [stacked[lo:hi].copy() for lo, hi in zip(offsets[:-1], offsets[1:])]


def _score_block(design, rep_rows, labels, s_prev, duals, beta, rho, eta, max_inner):
    """Solve the score block; returns the stacked scores and a cap flag."""
    linear = design @ beta
    target = linear - duals
    out = target.copy()  # closed form off the representatives
    t_rep = target[rep_rows]
    it = s_prev[rep_rows].copy()
    zeta = it.copy()
    lam = 0.0
    capped = True
    for k in range(max_inner):
        lam, gamma = fista_momentum(lam)
        zeta_next = (eta * rho * t_rep + it - eta * (sigmoid(it) - labels)) / (eta * rho + 1.0)
        it_next = (1.0 - gamma) * zeta_next + gamma * zeta
        delta = float(np.max(np.abs(it_next - it))) if it.size else 0.0
        zeta, it = zeta_next, it_next
        if k >= 2 and delta < SCORE_TOL:
            capped = False
            break
    out[rep_rows] = it
    return out, capped


def update_scores(state, coef, data, hyper):
    """Score-block update at the current coefficients.

    Non-representative entries take their closed form ``x . beta - dual``;
    each bag's representative entry solves its one-dimensional penalized
    logistic problem.  Returns ``(per-bag score vectors, inner_capped)``
    without mutating ``state``.
    """
    design, offsets, labels = _stacked_design(data)
    rep_rows = _rep_rows(state, data, offsets)
    stacked, capped = _score_block(
        design,
        rep_rows,
        labels,
        np.concatenate(state.scores),
        np.concatenate(state.duals),
        coef.values,
        state.rho,
        hyper.eta,
        hyper.max_fista,
    )
    if not np.all(np.isfinite(stacked)):
        bad = int(np.flatnonzero(~np.isfinite(stacked))[0])
        user = data.bags[int(np.searchsorted(offsets, bad, side="right")) - 1].user_id
        raise DivergenceError(f"score update produced a non-finite value for user {user!r}")
    return _split_by_bag(stacked, offsets), capped


def linearize_concave(coef, weights, lambda2):
    """Tangent plane of ``lambda2 * sum_j b[j] * w[j]**2`` at ``coef``.

    The intercept never enters the spread term, so its gradient entry is 0.
    """
    beta = coef.values
    kw = coef.keyword_weights
    if weights.b.shape[0] != kw.shape[0]:
        raise DimensionError(
            f"weights cover {weights.b.shape[0]} keywords, coefficients cover {kw.shape[0]}"
        )
    value = lambda2 * float(np.sum(weights.b * kw * kw))
    gradient = np.zeros_like(beta)
    gradient[1:] = 2.0 * lambda2 * weights.b * kw
    return ConcaveLinearization(beta.copy(), value, gradient)


def smooth_gradient(coef, score_targets, data, weights, lin, rho, lambda2):
    """Gradient of the smooth part of the coefficient subproblem.

    ``score_targets`` holds per-bag vectors of auxiliary score plus dual
    (the values the linear scores are pulled toward).  The smooth part is
    the quadratic coupling, the convex cross-domain term, minus the
    linearized concave term.
    """
    design, _, _ = _stacked_design(data)
    pulled = np.concatenate([np.asarray(v, dtype=float) for v in score_targets])
    if pulled.shape[0] != design.shape[0]:
        raise DimensionError(
            f"score targets cover {pulled.shape[0]} instances, dataset has {design.shape[0]}"
        )
    beta = coef.values
    grad = -rho * (design.T @ (pulled - design @ beta))
    grad[1:] += 4.0 * lambda2 * weights.a * beta[1:]
    return grad - lin.gradient


def _top_eigenvalue(gram):
    """Largest eigenvalue of a PSD matrix by fixed-count power iteration."""
    n = gram.shape[0]
    vec = np.linspace(1.0, 2.0, n)  # deterministic, not axis-aligned
    vec /= np.linalg.norm(vec)
    for _ in range(_POWER_STEPS):
        nxt = gram @ vec
        norm = np.linalg.norm(nxt)
        if norm == 0.0:
            return 0.0
        vec = nxt / norm
    return float(vec @ gram @ vec)


def _coef_block(design, pulled, weights, rho, hyper, beta_start):
    """Difference-of-convex solve of the coefficient block."""
    lam1, lam2 = hyper.lambda1, hyper.lambda2
    a_pad = np.zeros(design.shape[1])
    a_pad[1:] = 2.0 * lam2 * weights.a
    b_pad = np.zeros(design.shape[1])
    b_pad[1:] = lam2 * weights.b
    gram = design.T @ design
    pulled_proj = design.T @ pulled
    lip = rho * _top_eigenvalue(gram) * _LIPSCHITZ_MARGIN + float(4.0 * lam2 * weights.a.max(initial=0.0))
    if lip <= 0.0:
        raise DivergenceError("coefficient subproblem has no curvature; check the inputs")
    eta = 1.0 / lip

    def convex_value(beta):
        resid = pulled - design @ beta
        return (
            lam1 * float(np.sum(np.abs(beta)))
            + 0.5 * rho * float(resid @ resid)
            + float(np.sum(a_pad * beta * beta))
        )

    def concave_value(beta):
        return float(np.sum(b_pad * beta * beta))

    beta = beta_start.copy()
    objectives = [convex_value(beta) - concave_value(beta)]
    rises = 0
    inner_capped = False
    outer_capped = True
    for _ in range(hyper.max_ccp):
        lin_grad = 2.0 * b_pad * beta
        it = beta.copy()
        zeta = beta.copy()
        lam = 0.0
        converged = False
        for k in range(hyper.max_fista):
            lam, gamma = fista_momentum(lam)
            grad = rho * (gram @ it - pulled_proj) + 2.0 * a_pad * it - lin_grad
            zeta_next = soft_threshold(it - eta * grad, lam1 * eta)
            it_next = (1.0 - gamma) * zeta_next + gamma * zeta
            delta = float(np.max(np.abs(it_next - it)))
            zeta, it = zeta_next, it_next
            if k >= 2 and delta < COEF_TOL:
                converged = True
                break
        if not converged:
            inner_capped = True
        if not np.all(np.isfinite(it)) or float(np.max(np.abs(it))) > _DIVERGENCE_CAP:
            raise DivergenceError(
                "coefficient iterates grew without bound; increase rho0 "
                "(or enable adaptive_rho) relative to lambda2"
            )
        objectives.append(convex_value(it) - concave_value(it))
        if objectives[-1] > objectives[-2] + _RISE_TOL:
            rises += 1
            if rises >= _RISE_LIMIT:
                raise DivergenceError(
                    "difference-of-convex objective rose on "
                    f"{_RISE_LIMIT} consecutive steps; increase rho0 relative to lambda2"
                )
        else:
            rises = 0
        change = float(np.max(np.abs(it - beta)))
        beta = it
        if change < CCP_TOL:
            outer_capped = False
            break
    return CoefficientUpdate(Coefficients(beta), tuple(objectives), inner_capped, outer_capped)


def update_coefficients(state, coef, data, weights, hyper):
    """Coefficient-block update given fresh auxiliary scores in ``state``.

    Repeatedly linearizes the concave within-domain term at the current
    point and solves the resulting l1-penalized convex problem with an
    accelerated proximal loop warm-started from ``coef``.
    """
    design, _, _ = _stacked_design(data)
    pulled = np.concatenate(state.scores) + np.concatenate(state.duals)
    return _coef_block(design, pulled, weights, state.rho, hyper, coef.values.copy())


def update_duals(state, coef, data):
    """Dual ascent along the primal residual, in place.

    The dual is stored in the scaled convention (the penalty reads
    ``rho/2 * ||score - linear + dual||^2``), so the consistent ascent step
    is ``dual += score - linear``; the unscaled multiplier is recovered as
    ``rho * dual``.  Applying the unscaled increment ``rho * residual`` to a
    scaled dual amplifies it by ``|1 - rho|`` per sweep and diverges for any
    ``rho > 2``.
    """
    design, offsets, _ = _stacked_design(data)
    linear = design @ coef.values
    for u, (lo, hi) in enumerate(zip(offsets[:-1], offsets[1:])):
        state.duals[u] += state.scores[u] - linear[lo:hi]
    return state.duals


def compute_residuals(state, coef_prev, coef_new, data):
    """Primal and dual residual norms after a coefficient update.

    Primal: distance between auxiliary and linear scores.  Dual: norm of
    the stacked design applied to the coefficient step, scaled by ``rho``.
    """
    design, _, _ = _stacked_design(data)
    stacked = np.concatenate(state.scores)
    r_primal = float(np.linalg.norm(stacked - design @ coef_new.values))
    s_dual = float(np.linalg.norm(state.rho * (design @ (coef_prev.values - coef_new.values))))
    return r_primal, s_dual


def adapt_penalty(rho, r_primal, s_dual):
    """Residual balancing: double ``rho`` when primal dominates tenfold,
    halve it when dual dominates tenfold, otherwise leave it alone."""
    if r_primal > 10.0 * s_dual:
        return 2.0 * rho
    if s_dual > 10.0 * r_primal:
        return 0.5 * rho
    return rho


def _collapse_bags(data):
    """One row per bag: its column sums (intercept prepended)."""
    width = len(data.vocabulary)
    design = np.empty((len(data.bags), width + 1), dtype=float)
    design[:, 0] = 1.0
    for u, bag in enumerate(data.bags):
        design[u, 1:] = bag.counts.sum(axis=0)
    labels = np.array([bag.label for bag in data.bags], dtype=float)
    return design, labels


def _warm_start(data, hyper):
    """l1 logistic fit on bags collapsed to single summed instances.

    Runs the same accelerated proximal machinery as the coefficient block
    with no domain term, giving a deterministic starting point when the
    caller supplies none.
    """
    design, labels = _collapse_bags(data)
    lam1 = hyper.lambda1
    lip = _top_eigenvalue(design.T @ design) * _LIPSCHITZ_MARGIN / 4.0
    eta = 1.0 / lip if lip > 0 else 1.0
    beta = np.zeros(design.shape[1])
    it = beta.copy()
    zeta = beta.copy()
    lam = 0.0
    for k in range(hyper.max_fista):
        lam, gamma = fista_momentum(lam)
        grad = design.T @ (sigmoid(design @ it) - labels)
        zeta_next = soft_threshold(it - eta * grad, lam1 * eta)
        it_next = (1.0 - gamma) * zeta_next + gamma * zeta
        delta = float(np.max(np.abs(it_next - it)))
        zeta, it = zeta_next, it_next
        if k >= 2 and delta < COEF_TOL:
            break
    return it


def fit(data, hyper, coef_init=None, threads=1):
    """Train the classifier; returns ``(Model, SolveTrace)``.

    Parameters
    ----------
    data : Dataset
        Bags, labels, and (possibly empty) source-domain reports.
    hyper : Hyperparams
    coef_init : Coefficients, optional
        Starting point.  When omitted, an l1 logistic fit on collapsed bags
        supplies it.
    threads : int
        Worker threads for the chunked domain-weight reductions.  The
        result is bit-identical for any value.

    Notes
    -----
    Termination: both residual norms under their tolerances (scaled by the
    instance count and the matching vector norms), or ``max_outer``
    iterations.  With identical inputs and seed the returned model and every
    non-timing trace field are bit-identical between calls.
    """
    if not data.bags:
        raise ConfigError("cannot fit on a dataset with no bags")
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    design, offsets, labels = _stacked_design(data)
    n_entries = design.shape[0]
    positive = data.positive_indices()
    plan = partition(
        data.reports.n_reports,
        [data.bags[i].user_id for i in positive],
        hyper.partitions,
        hyper.seed,
    )
    if coef_init is None:
        beta = _warm_start(data, hyper)
    else:
        if len(coef_init) != len(data.vocabulary) + 1:
            raise DimensionError(
                f"initial coefficients have length {len(coef_init)}, expected {len(data.vocabulary) + 1}"
            )
        beta = coef_init.values.copy()
    coef = Coefficients(beta)
    state = AdmmState(
        scores=_split_by_bag(design @ beta, offsets),
        duals=[np.zeros(bag.n_instances) for bag in data.bags],
        rho=float(hyper.rho0),
        rep_index={},
    )
    trace = SolveTrace()
    warned_rho = False
    for outer in range(hyper.max_outer):
        started = time.perf_counter()
        # 1. representative refresh; selections stay fixed through the iteration
        linear = design @ coef.values
        rep_rows = np.empty(len(data.bags), dtype=np.intp)
        for u, (lo, hi) in enumerate(zip(offsets[:-1], offsets[1:])):
            rep_rows[u] = lo + select_representative(linear[lo:hi])
        state.rep_index = {
            bag.user_id: int(rep_rows[u] - offsets[u]) for u, bag in enumerate(data.bags)
        }
        if hyper.lambda2 > 0 and positive and data.reports.n_reports > 0:
            selected = np.array(
                [data.bags[i].counts[state.rep_index[data.bags[i].user_id]] for i in positive]
            )
            weights = mmd_weights(data.reports, selected, plan, threads=threads)
        else:
            weights = MmdWeights.empty(len(data.vocabulary))
        # 2. penalty rebalancing (needs residuals, so never on the first pass)
        if hyper.adaptive_rho and outer > 0:
            new_rho = adapt_penalty(state.rho, state.r_primal, state.s_dual)
            if new_rho != state.rho:
                scale = state.rho / new_rho
                for h_u in state.duals:
                    h_u *= scale
                state.rho = new_rho
        if not warned_rho and hyper.lambda2 > 0 and state.rho < 10.0 * hyper.lambda2:
            warnings.warn(
                f"rho={state.rho} fell below 10*lambda2={10.0 * hyper.lambda2}",
                StabilityWarning,
                stacklevel=2,
            )
            warned_rho = True
        # 3. score block
        stacked_scores, score_capped = _score_block(
            design,
            rep_rows,
            labels,
            np.concatenate(state.scores),
            np.concatenate(state.duals),
            coef.values,
            state.rho,
            hyper.eta,
            hyper.max_fista,
        )
        if not np.all(np.isfinite(stacked_scores)):
            raise DivergenceError(f"outer iteration {outer + 1}: score update diverged")
        state.scores = _split_by_bag(stacked_scores, offsets)
        # 4. coefficient block
        try:
            result = _coef_block(
                design,
                stacked_scores + np.concatenate(state.duals),
                weights,
                state.rho,
                hyper,
                coef.values.copy(),
            )
        except DivergenceError as exc:
            raise DivergenceError(f"outer iteration {outer + 1}: {exc}") from exc
        coef_prev, coef = coef, result.coefficients
        # 5. dual ascent (scaled convention, see update_duals) and residuals
        linear_new = design @ coef.values
        duals_flat = np.concatenate(state.duals) + (stacked_scores - linear_new)
        state.duals = _split_by_bag(duals_flat, offsets)
        r_primal = float(np.linalg.norm(stacked_scores - linear_new))
        s_dual = float(np.linalg.norm(state.rho * (design @ (coef_prev.values - coef.values))))
        state.r_primal, state.s_dual = r_primal, s_dual
        state.k = outer + 1
        objective = full_objective(
            coef, data, weights if hyper.lambda2 > 0 else None, hyper
        )
        trace.records.append(
            TraceRecord(
                k=outer + 1,
                r_primal=r_primal,
                s_dual=s_dual,
                rho=state.rho,
                objective=objective,
                seconds=time.perf_counter() - started,
                inner_capped=score_capped or result.inner_capped or result.outer_capped,
            )
        )
        eps_primal = math.sqrt(n_entries) * hyper.tol_abs + hyper.tol_rel * max(
            float(np.linalg.norm(stacked_scores)), float(np.linalg.norm(linear_new))
        )
        eps_dual = math.sqrt(n_entries) * hyper.tol_abs + hyper.tol_rel * float(
            np.linalg.norm(state.rho * duals_flat)
        )
        if r_primal < eps_primal and s_dual < eps_dual:
            trace.converged = True
            break
    model = Model(data.vocabulary, coef, hyper, trace.summary())
    return model, trace


def predict(model, bag):
    """Probability that ``bag`` is positive under ``model``."""
    if bag.counts.shape[1] != len(model.vocabulary):
        raise DimensionError(
            f"bag {bag.user_id!r} has {bag.counts.shape[1]} keyword columns, "
            f"model vocabulary has {len(model.vocabulary)}"
        )
    return user_probability(model.coefficients, bag)
