"""Tests for threshold metrics, ranking curves, and curve export."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from miadapt.errors import EmptyInputError, UndefinedMetricError
from miadapt.metrics import (
    ScoredLabel,
    pr_aupr,
    roc_auc,
    threshold_metrics,
    write_curve_points,
)


def scored(pairs):
    return [ScoredLabel(float(s), int(y)) for s, y in pairs]


def pairwise_auc(items):
    """Mann-Whitney statistic: concordant pairs with ties counted half."""
    positives = [s.score for s in items if s.label == 1]
    negatives = [s.score for s in items if s.label == 0]
    total = 0.0
    for p in positives:
        for n in negatives:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(positives) * len(negatives))


class TestThresholdMetrics:
    def test_hand_enumeration(self):
        result = threshold_metrics(scored([(0.9, 1), (0.2, 0), (0.6, 0)]), 0.5)
        assert_allclose(result.accuracy, 2.0 / 3.0, rtol=0, atol=1e-15)
        assert_allclose(result.precision, 0.5, rtol=0, atol=0)
        assert_allclose(result.recall, 1.0, rtol=0, atol=0)
        assert_allclose(result.f_score, 2.0 / 3.0, rtol=0, atol=1e-15)

    def test_perfect_classifier(self):
        result = threshold_metrics(scored([(0.9, 1), (0.8, 1), (0.1, 0)]), 0.5)
        assert result.accuracy == 1.0
        assert result.precision == 1.0
        assert result.recall == 1.0
        assert result.f_score == 1.0

    def test_harmonic_mean_of_given_rates(self):
        # direct check of the combination rule on fixed precision/recall
        pr, re = 0.7735, 0.5333
        fs = 2.0 * pr * re / (pr + re)
        assert_allclose(fs, 0.6313246862565045, rtol=0, atol=1e-15)
        assert abs(fs - 0.6310) <= 0.0005

    def test_threshold_ties_predict_positive(self):
        result = threshold_metrics(scored([(0.5, 1), (0.4, 0)]), 0.5)
        assert result.recall == 1.0
        assert result.accuracy == 1.0

    def test_no_predicted_positives_gives_zero_precision(self):
        result = threshold_metrics(scored([(0.1, 1), (0.2, 0)]), 0.9)
        assert result.precision == 0.0
        assert result.recall == 0.0
        assert result.f_score == 0.0

    def test_empty_input_rejected(self):
        with pytest.raises(EmptyInputError):
            threshold_metrics([], 0.5)

    def test_all_metrics_within_unit_interval(self):
        rng = np.random.default_rng(151)
        for _ in range(30):
            n = int(rng.integers(1, 40))
            items = scored(zip(rng.uniform(0, 1, size=n), rng.integers(0, 2, size=n)))
            threshold = float(rng.uniform(0, 1))
            result = threshold_metrics(items, threshold)
            for value in (result.accuracy, result.precision, result.recall, result.f_score):
                assert 0.0 <= value <= 1.0


class TestRocAuc:
    def test_perfect_separation(self):
        area, _ = roc_auc(scored([(0.9, 1), (0.8, 1), (0.2, 0), (0.1, 0)]))
        assert area == 1.0

    def test_all_tied_scores(self):
        area, _ = roc_auc(scored([(0.5, 1), (0.5, 0), (0.5, 1), (0.5, 0)]))
        assert_allclose(area, 0.5, rtol=0, atol=1e-15)

    def test_four_point_case(self):
        area, _ = roc_auc(scored([(0.9, 1), (0.8, 0), (0.7, 1), (0.1, 0)]))
        assert_allclose(area, 0.75, rtol=0, atol=1e-15)

    def test_single_class_rejected(self):
        with pytest.raises(UndefinedMetricError):
            roc_auc(scored([(0.9, 1), (0.8, 1)]))

    def test_matches_pairwise_statistic(self):
        rng = np.random.default_rng(157)
        for _ in range(100):
            n = int(rng.integers(2, 501))
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            quantized = rng.integers(0, 20, size=n) / 19.0  # force score ties
            items = scored(zip(quantized, labels))
            area, _ = roc_auc(items)
            assert_allclose(area, pairwise_auc(items), rtol=0, atol=1e-10)

    def test_invariant_under_increasing_transform(self):
        rng = np.random.default_rng(163)
        raw = rng.uniform(0, 1, size=60)
        labels = rng.integers(0, 2, size=60)
        labels[0], labels[1] = 0, 1
        base, _ = roc_auc(scored(zip(raw, labels)))
        squeezed, _ = roc_auc(scored(zip(raw**2, labels)))
        shifted, _ = roc_auc(scored(zip(0.5 * raw + 0.25, labels)))
        assert_allclose(squeezed, base, rtol=0, atol=1e-12)
        assert_allclose(shifted, base, rtol=0, atol=1e-12)

    def test_curve_anchored_and_monotone(self):
        rng = np.random.default_rng(167)
        items = scored(zip(rng.uniform(0, 1, size=30), rng.integers(0, 2, size=30)))
        items[0] = ScoredLabel(0.99, 1)
        items[1] = ScoredLabel(0.01, 0)
        _, points = roc_auc(items)
        assert points[0].x == 0.0 and points[0].y == 0.0
        assert points[-1].x == 1.0 and points[-1].y == 1.0
        xs = [p.x for p in points]
        ys = [p.y for p in points]
        assert all(b >= a for a, b in zip(xs, xs[1:]))
        assert all(b >= a for a, b in zip(ys, ys[1:]))


class TestPrAupr:
    def test_perfect_ranking(self):
        area, _ = pr_aupr(scored([(0.9, 1), (0.8, 1), (0.2, 0)]))
        assert area == 1.0

    def test_single_positive_ranked_last(self):
        for n in (2, 5, 9):
            items = scored(
                [(1.0 - 0.1 * i, 0) for i in range(n - 1)] + [(0.05, 1)]
            )
            area, _ = pr_aupr(items)
            assert_allclose(area, 1.0 / n, rtol=0, atol=1e-12)

    def test_four_point_case(self):
        area, _ = pr_aupr(scored([(0.9, 1), (0.8, 0), (0.7, 1), (0.1, 0)]))
        assert_allclose(area, 5.0 / 6.0, rtol=0, atol=1e-15)

    def test_four_point_case_threshold_sweep(self):
        # average precision re-derived by scanning every distinct score
        items = scored([(0.9, 1), (0.8, 0), (0.7, 1), (0.1, 0)])
        total_pos = 2
        sweep = 0.0
        prev_recall = 0.0
        for threshold in (0.9, 0.8, 0.7, 0.1):
            kept = [s for s in items if s.score >= threshold]
            tp = sum(s.label for s in kept)
            precision = tp / len(kept)
            recall = tp / total_pos
            sweep += (recall - prev_recall) * precision
            prev_recall = recall
        area, _ = pr_aupr(items)
        assert_allclose(area, sweep, rtol=0, atol=1e-15)

    def test_no_positives_rejected(self):
        with pytest.raises(UndefinedMetricError):
            pr_aupr(scored([(0.9, 0), (0.1, 0)]))

    def test_bounded_by_unit_interval(self):
        rng = np.random.default_rng(173)
        for _ in range(30):
            n = int(rng.integers(2, 60))
            labels = rng.integers(0, 2, size=n)
            labels[0] = 1
            items = scored(zip(rng.uniform(0, 1, size=n), labels))
            area, _ = pr_aupr(items)
            assert 0.0 <= area <= 1.0


class TestCurveExport:
    def test_csv_header_and_rows(self, tmp_path):
        items = scored([(0.9, 1), (0.8, 0), (0.7, 1), (0.1, 0)])
        _, points = roc_auc(items)
        out = tmp_path / "roc.csv"
        write_curve_points(points, out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "threshold,x,y"
        assert len(lines) == len(points) + 1
        first = lines[1].split(",")
        assert float(first[1]) == points[0].x
        assert float(first[2]) == points[0].y
