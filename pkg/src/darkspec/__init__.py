"""darkspec: catastrophic-loss processes, risk estimation, narrative graphs,
and the iterative speculation engine that ties them together."""

from .baseline import (
    ConstantDetection,
    ImprovingDetection,
    MeasurementError,
    StaggeredPanel,
    bias_nospec,
    delta_benefit,
    improvement_curve,
    staggered_frequency,
    variance_gap,
    variance_gap_with_error,
)
from .engine import (
    CostModel,
    EngineConfig,
    GateDecision,
    HyperEstimate,
    LossWeights,
    NarrativeQuality,
    PsiShape,
    RedLineConfig,
    RoundBenefits,
    RoundDeltas,
    RoundLedger,
    StoppingResult,
    UnderwritingResult,
    community_precision_condition,
    continuation_constant,
    continuation_variable,
    hyperanxiety_avoidance,
    optimal_stopping_brute,
    read_ledger,
    red_line_check,
    replay_ledger,
    run_round,
    statistical_loss,
    write_ledger,
)
from .errors import (
    ConfigError,
    DarkspecError,
    DomainError,
    MitigationInvalidError,
    NarrativeInvalidError,
    NarrativeSyntaxError,
    NoEventsError,
    ParameterError,
    RoundAbortedError,
    VarianceUndefinedError,
)
from .estimation import (
    EstimateSource,
    FrequencyEstimate,
    PKREResult,
    RiskEstimate,
    SeverityEstimate,
    compute_pkre,
    estimate_frequency,
    estimate_from_observation,
    estimate_severity,
    expected_jump_loss,
    jump_loss_variance,
)
from .narrative import (
    Action,
    ActionKind,
    Actor,
    ActorKind,
    Happening,
    MitigationOutcome,
    Narrative,
    NarrativeEdge,
    Pivot,
    PivotAnnotation,
    ValidationReport,
    apply_mitigation,
    build_narrative,
    find_pivots,
    mitigator_argmin,
    parse_narrative,
    serialize_narrative,
    validate,
)
from .process import (
    LevyComponent,
    MomentSummary,
    PathSample,
    RiskCategory,
    aggregate,
    derive_seed,
    sample_path,
    sample_paths,
    theoretical_moments,
    write_paths_csv,
)
from .severity import (
    Degenerate,
    Exponential,
    LogNormal,
    Mixture,
    Pareto,
    SeverityDistribution,
)

__version__ = "0.1.0"
