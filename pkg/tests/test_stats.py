"""Correlation statistics and metric/human agreement.

Closed-form oracles: Pearson's r is recomputed from the covariance formula
longhand, and Kendall's tau-b from explicit pair enumeration, so the scipy
route in the implementation is checked against independent arithmetic.
"""

from __future__ import annotations

import math
import random

import pytest

from argcov import (
    AlignmentMismatch,
    CorrelationResult,
    DegenerateSeries,
    PairedSeries,
    SIGNIFICANCE_LEVEL,
    kendall_tau_b,
    metric_human_agreement,
    normalize_likert,
    pearson,
    position_coverage_correlation,
)


def oracle_pearson_r(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = sum((a - mx) ** 2 for a in x)
    vy = sum((b - my) ** 2 for b in y)
    return cov / math.sqrt(vx * vy)


def oracle_kendall_tau_b(x, y):
    # pairs tied in both series count toward neither tie term
    concordant = discordant = ties_x_only = ties_y_only = 0
    n = len(x)
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                continue
            elif dx == 0:
                ties_x_only += 1
            elif dy == 0:
                ties_y_only += 1
            elif dx * dy > 0:
                concordant += 1
            else:
                discordant += 1
    denom = math.sqrt(
        (concordant + discordant + ties_x_only)
        * (concordant + discordant + ties_y_only)
    )
    return (concordant - discordant) / denom


# --- paired series ----------------------------------------------------------------


def test_paired_series_validates_lengths():
    with pytest.raises(ValueError):
        PairedSeries((1.0, 2.0), (1.0,))
    with pytest.raises(ValueError):
        PairedSeries((1.0,), (1.0,), labels=("a", "b"))


def test_from_pairs_drops_gaps_and_counts_them():
    series = PairedSeries.from_pairs(
        [(1.0, 2.0), (None, 3.0), (4.0, None), (float("nan"), 1.0), (5.0, 6.0)],
        labels=["a", "b", "c", "d", "e"],
    )
    assert series.x == (1.0, 5.0)
    assert series.y == (2.0, 6.0)
    assert series.labels == ("a", "e")
    assert series.dropped == 3


# --- pearson ---------------------------------------------------------------------


def test_pearson_closed_form_fixture():
    # oracle by hand: x = 1..5, y = (2,1,4,3,5) → r = 0.8 exactly
    x = (1.0, 2.0, 3.0, 4.0, 5.0)
    y = (2.0, 1.0, 4.0, 3.0, 5.0)
    assert oracle_pearson_r(x, y) == pytest.approx(0.8, abs=1e-12)
    result = pearson(PairedSeries(x, y))
    assert result.statistic == pytest.approx(0.8, abs=1e-9)
    assert result.method == "pearson"
    assert result.n == 5
    # p-value from the t transform: t = r sqrt((n-2)/(1-r^2)), df = 3
    t = 0.8 * math.sqrt(3 / (1 - 0.64))
    from scipy.stats import t as t_dist

    want_p = 2 * (1 - t_dist.cdf(t, 3))
    assert result.p_value == pytest.approx(want_p, abs=1e-12)


def test_pearson_matches_oracle_on_random_series():
    rng = random.Random(314)
    for _ in range(100):
        n = rng.randint(3, 30)
        x = [rng.uniform(-5, 5) for _ in range(n)]
        y = [rng.uniform(-5, 5) for _ in range(n)]
        if len(set(x)) == 1 or len(set(y)) == 1:
            continue
        result = pearson(PairedSeries(tuple(x), tuple(y)))
        assert result.statistic == pytest.approx(oracle_pearson_r(x, y), abs=1e-9)


def test_pearson_perfect_linear_relation():
    x = tuple(float(i) for i in range(10))
    y = tuple(3.0 * v + 1.0 for v in x)
    result = pearson(PairedSeries(x, y))
    assert result.statistic == pytest.approx(1.0, abs=1e-12)
    assert result.p_value < 1e-9
    assert result.significant


def test_pearson_degenerate_series():
    with pytest.raises(DegenerateSeries):
        pearson(PairedSeries((1.0, 2.0), (3.0, 4.0)))  # n < 3
    with pytest.raises(DegenerateSeries):
        pearson(PairedSeries((1.0, 1.0, 1.0), (1.0, 2.0, 3.0)))  # zero variance


# --- kendall ---------------------------------------------------------------------


def test_kendall_pair_enumeration_fixture():
    # oracle: tie-free ranks with 5 swaps... x = 1..5, y = (2,1,4,3,5):
    # 10 pairs, 8 concordant, 2 discordant → tau = 6/10 = 0.6
    x = (1.0, 2.0, 3.0, 4.0, 5.0)
    y = (2.0, 1.0, 4.0, 3.0, 5.0)
    assert oracle_kendall_tau_b(x, y) == pytest.approx(0.6, abs=1e-12)
    result = kendall_tau_b(PairedSeries(x, y))
    assert result.statistic == pytest.approx(0.6, abs=1e-9)
    assert result.method == "kendall_tau_b"


def test_kendall_single_swap_fixture():
    # oracle: y = (1,3,2,4) has exactly one discordant pair of 6 → (5-1)/6 = 2/3
    x = (1.0, 2.0, 3.0, 4.0)
    y = (1.0, 3.0, 2.0, 4.0)
    assert oracle_kendall_tau_b(x, y) == pytest.approx(2 / 3, abs=1e-12)
    assert kendall_tau_b(PairedSeries(x, y)).statistic == pytest.approx(2 / 3, abs=1e-9)


def test_kendall_matches_oracle_with_ties():
    rng = random.Random(2718)
    for _ in range(100):
        n = rng.randint(3, 25)
        x = [float(rng.randint(0, 5)) for _ in range(n)]
        y = [float(rng.randint(0, 5)) for _ in range(n)]
        if len(set(x)) == 1 or len(set(y)) == 1:
            continue
        result = kendall_tau_b(PairedSeries(tuple(x), tuple(y)))
        assert result.statistic == pytest.approx(oracle_kendall_tau_b(x, y), abs=1e-9)


def test_monotone_series_correlate_perfectly():
    x = (0.1, 0.4, 0.5, 0.9)
    y = (1.0, 2.0, 30.0, 40.0)  # monotone but not linear
    assert kendall_tau_b(PairedSeries(x, y)).statistic == pytest.approx(1.0)
    x_lin = (1.0, 2.0, 3.0, 4.0)
    assert pearson(PairedSeries(x_lin, 2 *_as_tuple(x_lin))).statistic == pytest.approx(1.0)


def _as_tuple(values):
    import numpy as np

    return np.asarray(values)


def test_kendall_degenerate_series():
    with pytest.raises(DegenerateSeries):
        kendall_tau_b(PairedSeries((1.0, 2.0), (1.0, 2.0)))
    with pytest.raises(DegenerateSeries):
        kendall_tau_b(PairedSeries((2.0, 2.0, 2.0), (1.0, 2.0, 3.0)))


def test_significance_flag():
    assert SIGNIFICANCE_LEVEL == 0.05
    assert CorrelationResult(0.5, 0.05, 10, "pearson").significant
    assert not CorrelationResult(0.5, 0.051, 10, "pearson").significant


# --- normalization ----------------------------------------------------------------


def test_normalize_likert():
    assert normalize_likert(1) == 0.0
    assert normalize_likert(4) == 1.0
    assert normalize_likert(3) == pytest.approx(2 / 3)
    assert normalize_likert(3, scale_max=5) == 0.5
    with pytest.raises(ValueError):
        normalize_likert(0)
    with pytest.raises(ValueError):
        normalize_likert(5)


# --- metric/human agreement -------------------------------------------------------


ITEMS = [("d1", "a"), ("d2", "a"), ("d3", "a"), ("d4", "a"), ("d5", "a")]
METRIC = {item: score for item, score in zip(ITEMS, (0.1, 0.3, 0.5, 0.7, 0.9))}
EXPERTS = {
    "e1": {item: rating for item, rating in zip(ITEMS, (1, 2, 2, 3, 4))},
    "e2": {item: rating for item, rating in zip(ITEMS, (2, 1, 3, 4, 4))},
}


def test_agreement_per_expert_matches_direct_computation():
    reports = metric_human_agreement(METRIC, EXPERTS)
    assert set(reports) == {"kendall_tau_b", "pearson"}
    for method, direct in (("pearson", pearson), ("kendall_tau_b", kendall_tau_b)):
        report = reports[method]
        assert set(report.per_expert) == {"e1", "e2"}
        for expert, table in EXPERTS.items():
            series = PairedSeries.from_pairs(
                [(METRIC[item], normalize_likert(table[item])) for item in ITEMS]
            )
            want = direct(series)
            got = report.per_expert[expert]
            assert got.statistic == pytest.approx(want.statistic, abs=1e-12)
            assert got.p_value == pytest.approx(want.p_value, abs=1e-12)
        want_avg = sum(r.statistic for r in report.per_expert.values()) / 2
        assert report.avg_of_corr == pytest.approx(want_avg, abs=1e-12)


def test_agreement_corr_of_avg_uses_mean_expert():
    reports = metric_human_agreement(METRIC, EXPERTS)
    mean_series = PairedSeries.from_pairs(
        [
            (
                METRIC[item],
                (normalize_likert(EXPERTS["e1"][item]) + normalize_likert(EXPERTS["e2"][item]))
                / 2,
            )
            for item in ITEMS
        ]
    )
    want = pearson(mean_series)
    got = reports["pearson"].corr_of_avg
    assert got.statistic == pytest.approx(want.statistic, abs=1e-12)


def test_agreement_rejects_misaligned_experts():
    bad = {"e1": dict(EXPERTS["e1"])}
    bad["e1"].pop(("d5", "a"))
    with pytest.raises(AlignmentMismatch):
        metric_human_agreement(METRIC, bad)
    with pytest.raises(AlignmentMismatch):
        metric_human_agreement(METRIC, {})


# --- position/coverage correlation ---------------------------------------------------


def test_position_coverage_negative_relation():
    # coverage falls as salient content sits later: r must be negative
    pairs = [(0.1, 0.9), (0.3, 0.7), (0.5, 0.52), (0.7, 0.33), (0.9, 0.1)]
    result = position_coverage_correlation(pairs)
    assert result.statistic < -0.9
    assert result.significant


def test_position_coverage_drops_none_sides():
    pairs = [(0.1, 0.9), (None, 0.5), (0.5, 0.5), (0.9, 0.1)]
    result = position_coverage_correlation(pairs)
    assert result.n == 3
