"""Sparse multi-instance logistic classification with keyword-level domain
adaptation between formal reports and user message streams."""

from .errors import (
    ConfigError,
    DataFormatError,
    DimensionError,
    DivergenceError,
    EmptyBagError,
    EmptyInputError,
    ModelFormatError,
    ParseError,
    StabilityWarning,
    UndefinedMetricError,
    ValidationError,
)
from .metrics import (
    CurvePoint,
    ScoredLabel,
    ThresholdMetrics,
    pr_aupr,
    roc_auc,
    threshold_metrics,
    write_curve_points,
)
from .mmd import (
    MmdWeights,
    PartitionPlan,
    brute_force_mmd,
    cross_domain_weights,
    mmd_distance,
    mmd_weights,
    partition,
    representative_rows,
    within_domain_weights,
)
from .model import (
    Coefficients,
    Dataset,
    Hyperparams,
    KeywordVocabulary,
    ReportSet,
    UserBag,
    build_design_matrix,
    full_objective,
    instance_scores,
    select_representative,
    sigmoid,
    user_loss,
    user_probability,
)
from .solver import (
    AdmmState,
    CoefficientUpdate,
    ConcaveLinearization,
    Model,
    SolveTrace,
    TraceRecord,
    adapt_penalty,
    compute_residuals,
    fista_momentum,
    fit,
    linearize_concave,
    log_loss_gradient,
    predict,
    score_prox_step,
    smooth_gradient,
    soft_threshold,
    update_coefficients,
    update_duals,
    update_scores,
)
from .synth import SynthConfig, generate

__version__ = "0.1.0"
