"""Attention-weighted contextual semantic relevance metrics over word
embeddings, with penalized additive-model evaluation against word-level
reading times."""

from .corpus import (
    Corpus,
    StrokeTable,
    Token,
    load_corpus,
    load_stroke_table,
    log_transform,
    parse_corpus,
    parse_stroke_table,
    word_stroke_count,
)
from .embeddings import (
    EmbeddingTable,
    LoadDiagnostics,
    cosine,
    load_embeddings,
    parse_embeddings,
    pearson,
)
from .gam import (
    FitResult,
    LambdaSearch,
    TermSpec,
    bspline_basis,
    delta_aic,
    difference_penalty,
    fit_penalized,
    fit_report,
    gaussian_aic,
    partial_effect,
    random_intercept_term,
    smooth_term,
    tensor_term,
)
from .pipeline import (
    ComparisonResult,
    FitConfig,
    StudyResult,
    correlation_matrix,
    rank_metrics,
    run_model_comparison,
    run_response_table,
    run_study,
)
from .relevance import (
    PROXIMITY_WEIGHTS,
    UNIFORM_WEIGHTS,
    MetricRecord,
    WeightTable,
    WindowContext,
    annotate_corpus,
    build_window,
    metric_attention,
    metric_cosine_context,
    metric_dynamic,
    read_metric_records,
    sem_rev,
    write_metric_records,
)
from .report import emit_report

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "StrokeTable",
    "Token",
    "load_corpus",
    "load_stroke_table",
    "log_transform",
    "parse_corpus",
    "parse_stroke_table",
    "word_stroke_count",
    "EmbeddingTable",
    "LoadDiagnostics",
    "cosine",
    "load_embeddings",
    "parse_embeddings",
    "pearson",
    "FitResult",
    "LambdaSearch",
    "TermSpec",
    "bspline_basis",
    "delta_aic",
    "difference_penalty",
    "fit_penalized",
    "fit_report",
    "gaussian_aic",
    "partial_effect",
    "random_intercept_term",
    "smooth_term",
    "tensor_term",
    "ComparisonResult",
    "FitConfig",
    "StudyResult",
    "correlation_matrix",
    "rank_metrics",
    "run_model_comparison",
    "run_response_table",
    "run_study",
    "PROXIMITY_WEIGHTS",
    "UNIFORM_WEIGHTS",
    "MetricRecord",
    "WeightTable",
    "WindowContext",
    "annotate_corpus",
    "build_window",
    "metric_attention",
    "metric_cosine_context",
    "metric_dynamic",
    "read_metric_records",
    "sem_rev",
    "write_metric_records",
    "emit_report",
    "__version__",
]
