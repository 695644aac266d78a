"""Correlation statistics for validating coverage scores.

Pearson's r carries a two-sided p-value from the t statistic
t = r * sqrt((n - 2) / (1 - r^2)) with n - 2 degrees of freedom; Kendall's
tau uses the tau-b tie correction with the normal approximation of the
concordance statistic.  Series without usable variation (fewer than three
pairs, zero variance, or all ties) raise :class:`DegenerateSeries` instead
of emitting NaN.

Agreement with human ratings is reported per expert and against the mean
expert, both as the average of per-expert correlations and the correlation
of averages; human Likert ratings are normalized to [0, 1] first so the
two columns of any report share a scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from scipy import stats as _scipy_stats

from .errors import AlignmentMismatch, DegenerateSeries

SIGNIFICANCE_LEVEL = 0.05


@dataclass(frozen=True)
class PairedSeries:
    """Aligned numeric pairs; build with :meth:`from_pairs` to drop gaps."""

    x: tuple[float, ...]
    y: tuple[float, ...]
    labels: tuple[str, ...] = ()
    dropped: int = 0

    def __post_init__(self) -> None:
        if len(self.x) != len(self.y):
            raise ValueError("x and y must have equal length")
        if self.labels and len(self.labels) != len(self.x):
            raise ValueError("labels must match the pair count")

    def __len__(self) -> int:
        return len(self.x)

    @classmethod
    def from_pairs(
        cls,
        pairs: Sequence[tuple[float | None, float | None]],
        labels: Sequence[str] | None = None,
    ) -> "PairedSeries":
        """Drop pairs with a missing side, recording how many were lost."""
        xs: list[float] = []
        ys: list[float] = []
        kept_labels: list[str] = []
        dropped = 0
        for pos, (x, y) in enumerate(pairs):
            if x is None or y is None or math.isnan(float(x)) or math.isnan(float(y)):
                dropped += 1
                continue
            xs.append(float(x))
            ys.append(float(y))
            if labels is not None:
                kept_labels.append(labels[pos])
        return cls(tuple(xs), tuple(ys), tuple(kept_labels), dropped)


@dataclass(frozen=True)
class CorrelationResult:
    statistic: float
    p_value: float
    n: int
    method: str

    @property
    def significant(self) -> bool:
        """True when the correlation would not be grayed out (p <= 0.05)."""
        return self.p_value <= SIGNIFICANCE_LEVEL


def _check_series(series: PairedSeries) -> None:
    if len(series) < 3:
        raise DegenerateSeries(f"need at least 3 pairs, have {len(series)}")


def pearson(series: PairedSeries) -> CorrelationResult:
    """Pearson's r with a two-sided t-based p-value."""
    _check_series(series)
    if len(set(series.x)) == 1 or len(set(series.y)) == 1:
        raise DegenerateSeries("a series with zero variance has no correlation")
    result = _scipy_stats.pearsonr(series.x, series.y)
    return CorrelationResult(
        statistic=float(result.statistic),
        p_value=float(result.pvalue),
        n=len(series),
        method="pearson",
    )


def kendall_tau_b(series: PairedSeries) -> CorrelationResult:
    """Kendall's tau-b (tie-corrected), normal-approximation p-value."""
    _check_series(series)
    if len(set(series.x)) == 1 or len(set(series.y)) == 1:
        raise DegenerateSeries("an all-tied series has no rank correlation")
    result = _scipy_stats.kendalltau(series.x, series.y, variant="b", method="asymptotic")
    return CorrelationResult(
        statistic=float(result.statistic),
        p_value=float(result.pvalue),
        n=len(series),
        method="kendall_tau_b",
    )


_METHODS = {"pearson": pearson, "kendall_tau_b": kendall_tau_b}


def normalize_likert(value: float, scale_max: int = 4) -> float:
    """Map a 1..scale_max human rating onto [0, 1]."""
    if not 1 <= value <= scale_max:
        raise ValueError(f"rating {value} outside 1..{scale_max}")
    return (value - 1) / (scale_max - 1)


@dataclass(frozen=True)
class AgreementReport:
    """Metric/human agreement for one correlation method."""

    method: str
    per_expert: Mapping[str, CorrelationResult]
    corr_of_avg: CorrelationResult
    avg_of_corr: float


def metric_human_agreement(
    metric_scores: Mapping[tuple[str, str], float],
    human_scores: Mapping[str, Mapping[tuple[str, str], float]],
    likert_max: int = 4,
    methods: Sequence[str] = ("kendall_tau_b", "pearson"),
) -> dict[str, AgreementReport]:
    """Correlate metric scores with expert ratings item by item.

    Items are keyed by (doc_id, system).  Every expert must rate exactly
    the items the metric scored, or :class:`AlignmentMismatch` is raised;
    scores of None are dropped pairwise by the series constructor.

    Two summaries are reported per method: ``avg_of_corr``, the mean of the
    per-expert correlation statistics, and ``corr_of_avg``, the correlation
    against the mean expert rating.
    """
    if not human_scores:
        raise AlignmentMismatch("no expert score tables supplied")
    items = sorted(metric_scores)
    for expert, table in human_scores.items():
        if sorted(table) != items:
            raise AlignmentMismatch(
                f"expert {expert!r} rated a different item set than the metric"
            )
    labels = [f"{doc}:{system}" for doc, system in items]
    reports: dict[str, AgreementReport] = {}
    for method in methods:
        correlate = _METHODS[method]
        per_expert: dict[str, CorrelationResult] = {}
        for expert in sorted(human_scores):
            table = human_scores[expert]
            series = PairedSeries.from_pairs(
                [
                    (metric_scores[item], normalize_likert(table[item], likert_max))
                    for item in items
                ],
                labels,
            )
            per_expert[expert] = correlate(series)
        mean_series = PairedSeries.from_pairs(
            [
                (
                    metric_scores[item],
                    sum(
                        normalize_likert(human_scores[e][item], likert_max)
                        for e in human_scores
                    )
                    / len(human_scores),
                )
                for item in items
            ],
            labels,
        )
        reports[method] = AgreementReport(
            method=method,
            per_expert=per_expert,
            corr_of_avg=correlate(mean_series),
            avg_of_corr=sum(r.statistic for r in per_expert.values()) / len(per_expert),
        )
    return reports


def position_coverage_correlation(
    pairs: Sequence[tuple[float, float]],
) -> CorrelationResult:
    """Pearson correlation between salient-content position and coverage.

    Input pairs are (mean salient position, coverage score) per document;
    a negative statistic means later-positioned content gets covered less.
    """
    series = PairedSeries.from_pairs(pairs)
    return pearson(series)
