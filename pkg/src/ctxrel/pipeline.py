"""Base-vs-full model comparison per metric per response.

For each (metric, response) pair two models are fitted on exactly the
same rows:

    base:  log(duration) ~ intercept + te(stroke_count, log_freq)
                         + random_intercept(experiment)
    full:  base + s(metric)

and the metric's contribution is the AIC difference full - base
(negative = the metric improves fit). Because AIC differences are only
comparable on identical rows, a response table drops every row missing
any compared metric, either control, the response, or the experiment
id, so all comparisons within the table share one row set.

Surprisal rides through the same comparison pipeline as a fifth metric;
its values are in bits and get a natural-log transform before modeling,
which restricts its rows to strictly positive surprisal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .embeddings import ZeroVariance, pearson
from .gam import (
    FitResult,
    LambdaSearch,
    delta_aic,
    fit_penalized,
    fit_report,
    partial_effect,
    random_intercept_term,
    smooth_term,
    tensor_term,
)
from .relevance import MetricRecord

RELEVANCE_METRICS = ("cosine_context", "dynamic_rel", "attn_unweighted", "attn_weighted")
RESPONSES = ("log_first", "log_gaze", "log_total")

#: Smooth-term edf above this counts as "the smooth did something".
EDF_FLOOR = 1.01


class PipelineError(ValueError):
    """Base error for protocol orchestration."""


class TooFewRows(PipelineError):
    """Not enough complete rows to fit the models."""


class InsufficientData(PipelineError):
    """A correlation pair with fewer than three complete rows."""


class MixedResponse(PipelineError):
    """Ranking across results that do not share response and n."""


@dataclass(frozen=True)
class ComparisonResult:
    """One metric's base-vs-full comparison for one response."""

    metric_name: str
    response_name: str
    n_used: int
    aic_base: float
    aic_full: float
    delta_aic: float
    metric_edf: float
    metric_significant: bool


@dataclass(frozen=True)
class FitConfig:
    """Basis sizes and the lambda grid shared by every fit in a run."""

    k_smooth: int = 10
    k_tensor: int = 5
    search: LambdaSearch = LambdaSearch()


def metric_value(record: MetricRecord, name: str) -> Optional[float]:
    """A record's value for a named metric, transformed for modeling.

    Relevance metrics are used raw; surprisal (bits) is natural-logged,
    so zero-surprisal rows count as missing.
    """
    if name == "surprisal":
        v = record.surprisal
        return math.log(v) if v is not None and v > 0 else None
    if name not in RELEVANCE_METRICS:
        raise PipelineError(f"unknown metric {name!r}")
    return getattr(record, name)


def response_value(record: MetricRecord, name: str) -> Optional[float]:
    if name not in RESPONSES:
        raise PipelineError(f"unknown response {name!r}")
    return getattr(record, name)


def complete_rows(
    records: Sequence[MetricRecord],
    metric_names: Sequence[str],
    response_name: str,
) -> list[MetricRecord]:
    """Rows with every compared metric, both controls, and the response."""
    rows = []
    for r in records:
        if r.stroke_count is None or r.log_freq is None:
            continue
        if response_value(r, response_name) is None:
            continue
        if any(metric_value(r, m) is None for m in metric_names):
            continue
        rows.append(r)
    return rows


def _column(records: Sequence[MetricRecord], getter: Callable) -> np.ndarray:
    return np.array([getter(r) for r in records], dtype=np.float64)


def _control_terms(rows: Sequence[MetricRecord], config: FitConfig) -> list:
    stroke = _column(rows, lambda r: float(r.stroke_count))
    log_freq = _column(rows, lambda r: r.log_freq)
    experiments = [r.experiment_id for r in rows]
    return [
        tensor_term(
            stroke, log_freq, k1=config.k_tensor, k2=config.k_tensor,
            label="te(stroke_count,log_freq)",
        ),
        random_intercept_term(experiments, label="re(experiment)"),
    ]


def _fit_base(
    rows: Sequence[MetricRecord], response_name: str, config: FitConfig
) -> FitResult:
    y = _column(rows, lambda r: response_value(r, response_name))
    return fit_penalized(y, _control_terms(rows, config), search=config.search)


def _fit_pair(
    rows: Sequence[MetricRecord],
    metric_name: str,
    response_name: str,
    config: FitConfig,
    base: Optional[FitResult] = None,
) -> tuple[FitResult, FitResult, str]:
    """(base fit, full fit, smooth label) on one shared row set.

    The base model only depends on the rows and response, so a caller
    comparing several metrics on one row set can fit it once and pass
    it in.
    """
    y = _column(rows, lambda r: response_value(r, response_name))
    metric = _column(rows, lambda r: metric_value(r, metric_name))
    smooth_label = f"s({metric_name})"
    full_terms = _control_terms(rows, config)
    full_terms.insert(1, smooth_term(metric, k=config.k_smooth, label=smooth_label))
    if base is None:
        base = _fit_base(rows, response_name, config)
    full = fit_penalized(y, full_terms, search=config.search)
    return base, full, smooth_label


def _min_rows(rows: Sequence[MetricRecord], config: FitConfig) -> int:
    levels = len({r.experiment_id for r in rows})
    # intercept + constrained tensor + constrained smooth + one-hot levels
    return 1 + (config.k_tensor**2 - 1) + (config.k_smooth - 1) + levels


def _compare(
    rows: Sequence[MetricRecord],
    metric_name: str,
    response_name: str,
    config: FitConfig,
    base: Optional[FitResult] = None,
) -> tuple[ComparisonResult, FitResult, str]:
    base, full, smooth_label = _fit_pair(rows, metric_name, response_name, config, base)
    delta = delta_aic(full, base)
    metric_edf = full.term_edf[smooth_label]
    result = ComparisonResult(
        metric_name=metric_name,
        response_name=response_name,
        n_used=len(rows),
        aic_base=base.aic,
        aic_full=full.aic,
        delta_aic=delta,
        metric_edf=metric_edf,
        metric_significant=bool(metric_edf > EDF_FLOOR and delta < 0),
    )
    return result, full, smooth_label


def run_model_comparison(
    records: Sequence[MetricRecord],
    metric_name: str,
    response_name: str,
    config: FitConfig = FitConfig(),
) -> ComparisonResult:
    """Compare base vs base+s(metric) for one metric and response.

    Rows missing any variable used by either model are excluded from
    both fits, so the two AICs are computed on identical rows.

    Raises:
        TooFewRows: fewer complete rows than effective columns.
    """
    rows = complete_rows(records, [metric_name], response_name)
    if len(rows) <= _min_rows(rows, config):
        raise TooFewRows(
            f"{len(rows)} complete rows for {metric_name} x {response_name}"
        )
    return _compare(rows, metric_name, response_name, config)[0]


def run_response_table(
    records: Sequence[MetricRecord],
    metric_names: Sequence[str],
    response_name: str,
    config: FitConfig = FitConfig(),
) -> list[ComparisonResult]:
    """All metric comparisons for one response on a common row set.

    Pre-filtering to rows complete in every compared metric keeps
    n_used identical across the table, which is what makes the
    delta-AIC values comparable between metrics.
    """
    rows = complete_rows(records, metric_names, response_name)
    if len(rows) <= _min_rows(rows, config):
        raise TooFewRows(f"{len(rows)} complete rows for response {response_name}")
    base = _fit_base(rows, response_name, config)
    return [
        _compare(rows, name, response_name, config, base)[0] for name in metric_names
    ]


def rank_metrics(results: Sequence[ComparisonResult]) -> list[str]:
    """Metric names ordered best-first (ascending delta-AIC).

    Ties break lexicographically by metric name for determinism.

    Raises:
        MixedResponse: results span responses or row counts.
    """
    if not results:
        raise MixedResponse("nothing to rank")
    response = results[0].response_name
    n = results[0].n_used
    for r in results:
        if r.response_name != response or r.n_used != n:
            raise MixedResponse(
                f"cannot rank across ({r.response_name}, n={r.n_used}) "
                f"and ({response}, n={n})"
            )
    return [r.metric_name for r in sorted(results, key=lambda r: (r.delta_aic, r.metric_name))]


def correlation_matrix(
    records: Sequence[MetricRecord], columns: Sequence[str]
) -> tuple[list[str], np.ndarray]:
    """Pairwise-complete Pearson correlations among record columns.

    Each pair uses the rows where both columns are present; the
    diagonal is exactly 1.

    Raises:
        InsufficientData: a pair with fewer than three complete rows or
            a constant column.
    """
    if len(columns) < 2:
        raise PipelineError("correlation matrix needs at least two columns")
    values = {c: [getattr(r, c) for r in records] for c in columns}
    m = len(columns)
    corr = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            xs, ys = [], []
            for a, b in zip(values[columns[i]], values[columns[j]]):
                if a is not None and b is not None:
                    xs.append(a)
                    ys.append(b)
            if len(xs) < 3:
                raise InsufficientData(
                    f"pair ({columns[i]}, {columns[j]}): {len(xs)} complete rows"
                )
            try:
                r = pearson(np.array(xs), np.array(ys))
            except ZeroVariance:
                raise InsufficientData(
                    f"pair ({columns[i]}, {columns[j]}): constant column"
                ) from None
            corr[i, j] = corr[j, i] = r
    return list(columns), corr


@dataclass
class StudyResult:
    """Everything one full protocol run produces, ready for emission."""

    corr_labels: list[str]
    corr: np.ndarray
    comparisons: list[ComparisonResult]
    # (metric, response) -> (grid, centered effect values)
    curves: dict[tuple[str, str], tuple[np.ndarray, np.ndarray]]
    n_by_response: dict[str, int]
    # response -> {"base": fit summary, "full": {metric: fit summary}}
    fit_reports: dict[str, dict]


def run_study(
    records: Sequence[MetricRecord],
    metric_names: Optional[Sequence[str]] = None,
    response_names: Optional[Sequence[str]] = None,
    config: FitConfig = FitConfig(),
    grid_points: int = 100,
) -> StudyResult:
    """Correlation matrix + all comparisons + partial-effect curves.

    Metrics default to the four relevance metrics plus surprisal when
    any record carries one; responses default to those present in the
    data.
    """
    if metric_names is None:
        metric_names = list(RELEVANCE_METRICS)
        if any(r.surprisal is not None for r in records):
            metric_names.append("surprisal")
    if response_names is None:
        response_names = [
            resp for resp in RESPONSES
            if any(response_value(r, resp) is not None for r in records)
        ]
    if not response_names:
        raise PipelineError("no response columns present in the records")

    corr_columns = [c for c in RELEVANCE_METRICS]
    if any(r.surprisal is not None for r in records):
        corr_columns.append("surprisal")
    corr_labels, corr = correlation_matrix(records, corr_columns)

    comparisons: list[ComparisonResult] = []
    curves: dict[tuple[str, str], tuple[np.ndarray, np.ndarray]] = {}
    n_by_response: dict[str, int] = {}
    fit_reports: dict[str, dict] = {}
    for response in response_names:
        rows = complete_rows(records, metric_names, response)
        if len(rows) <= _min_rows(rows, config):
            raise TooFewRows(f"{len(rows)} complete rows for response {response}")
        n_by_response[response] = len(rows)
        base = _fit_base(rows, response, config)
        fit_reports[response] = {"base": fit_report(base), "full": {}}
        for name in metric_names:
            result, full, smooth_label = _compare(rows, name, response, config, base)
            comparisons.append(result)
            fit_reports[response]["full"][name] = fit_report(full)
            metric = _column(rows, lambda r: metric_value(r, name))
            grid = np.linspace(metric.min(), metric.max(), grid_points)
            curves[(name, response)] = partial_effect(full, smooth_label, grid)
    return StudyResult(
        corr_labels=corr_labels,
        corr=corr,
        comparisons=comparisons,
        curves=curves,
        n_by_response=n_by_response,
        fit_reports=fit_reports,
    )
