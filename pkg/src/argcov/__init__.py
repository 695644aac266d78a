"""Argument-coverage evaluation for generated summaries.

The package measures how well a summary covers the salient arguments of
its source document, at three granularities (one rating for the whole
argument set, one decision per argument, one decision per atomic fact),
and provides role-bias and positional-bias analyses over those scores.
"""
from .bias import (
    BiasReport,
    argument_position,
    beta,
    beta_raw,
    bias_reports,
    doc_averaged_prior,
    length_control_groups,
    position_control_filter,
    prior_fraction,
)
from .errors import (
    AlignmentMismatch,
    ArgcovError,
    AuthError,
    BudgetExceeded,
    DegenerateSeries,
    DuplicateDocId,
    EmptyArgumentSet,
    EmptyFactMap,
    IndexOutOfRange,
    MalformedRecord,
    MissingBinding,
    MissingUpstream,
    NoArguments,
    NoArgumentsOfRole,
    NoSalientArguments,
    OutOfRangeLikert,
    PolicyInapplicable,
    SpanOutOfBounds,
    TransportError,
    UnknownRole,
    UnparseableVerdict,
    ZeroFraction,
)
from .corpus import (
    ALL_ROLES,
    GREEDY_REFERENCE,
    ROLE_SENTENCES_ONLY,
    ArgumentUnit,
    CorpusStats,
    DocumentRecord,
    RoleLabel,
    RoleScheme,
    SaliencyPolicy,
    Sentence,
    SpanAnnotation,
    SummaryRecord,
    corpus_stats,
    extract_salient,
    get_scheme,
    load_corpus,
    map_spans_to_sentences,
    parse_policy,
    relevance_eq,
    serialize_corpus,
)
from .decompose import (
    AtomicFact,
    FactSet,
    decompose_all,
    decompose_argument,
    fallback_fact,
    filter_entailed,
)
from .judge import (
    CacheEntry,
    CallBudget,
    JudgeBackend,
    PromptTemplate,
    TEMPLATES,
    TokenBucket,
    Verdict,
    VerdictCache,
    cache_key,
    export_distillation,
    invoke,
    judge_call,
    lexical_backend,
    lexical_entail,
    parse_verdict,
    render_prompt,
)
from .position import (
    AttributionResult,
    PositionProfile,
    greedy_select,
    mean_salient_position,
    position_bin,
    position_profile,
    relative_position,
    rouge1,
    unit_positions,
)
from .scoring import (
    AtomicScoreResult,
    ErrorDistribution,
    FactVerdict,
    FullsetResult,
    RoleDecision,
    RoleScoreResult,
    ScoreCard,
    VerdictLog,
    VerdictRecord,
    aggregate_errors,
    arc_atomic_score,
    arc_role_score,
    format_score,
    per_role_atomic,
    phi_fullset,
    score_atomic,
    score_fullset,
    score_role,
)
from .stats import (
    SIGNIFICANCE_LEVEL,
    AgreementReport,
    CorrelationResult,
    PairedSeries,
    kendall_tau_b,
    metric_human_agreement,
    normalize_likert,
    pearson,
    position_coverage_correlation,
)

__version__ = "0.1.0"
