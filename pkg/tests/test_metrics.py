import math

import numpy as np
import pytest

from breathgan.classifiers import ClassifierSpec, default_classifier_set
from breathgan.data import APNEIC, NON_APNEIC, Window, build_dataset
from breathgan.metrics import (
    ConfusionMatrix,
    QualityReport,
    aggregate,
    cohen_kappa,
    confusion_stats,
    evaluate_quality,
    median_heuristic_sigma,
    mmd2_unbiased,
    mmd_t_statistic,
    optimize_kernel,
    t_metric,
    t_test_one_tailed,
    trts,
    tstr,
)
from breathgan.oracle import OracleRecordingSpec, OracleSpec, generate_corpus
from helpers import make_windows, mmd2_double_loop

FAST_CLASSIFIERS = [
    ClassifierSpec("knn", seed=0),
    ClassifierSpec("rf", seed=0, params={"n_trees": 10}),
]


def oracle_windows(seed=6, noise=0.05, hours=0.5, phase=0.0):
    spec = OracleSpec(
        seed=seed, sample_rate_hz=4, window_seconds=60,
        recordings=[OracleRecordingSpec("r", hours=hours, apneic_fraction=0.5,
                                        noise_std=noise, subject_phase=phase)])
    return build_dataset(generate_corpus(spec)).windows


class TestConfusionStats:
    def test_basic_rates(self):
        stats = confusion_stats(ConfusionMatrix(tp=40, tn=40, fp=10, fn=10))
        assert stats == {"accuracy": 0.8, "sensitivity": 0.8, "specificity": 0.8}

    def test_no_false_negatives(self):
        stats = confusion_stats(ConfusionMatrix(tp=7, tn=3, fp=2, fn=0))
        assert stats["sensitivity"] == 1.0

    def test_all_negative_predictions(self):
        # degenerate always-non-apneic predictor on mixed truth
        stats = confusion_stats(ConfusionMatrix(tp=0, tn=60, fp=0, fn=40))
        assert stats["sensitivity"] == 0.0

    def test_undefined_rate(self):
        with pytest.raises(ValueError, match="sensitivity"):
            confusion_stats(ConfusionMatrix(tp=0, tn=5, fp=5, fn=0))


class TestCohenKappa:
    def test_perfect_agreement(self):
        assert cohen_kappa(ConfusionMatrix(tp=30, tn=20, fp=0, fn=0)) == 1.0

    def test_hand_computed_value(self):
        # p_o = 0.8, marginals 0.5/0.5 -> p_e = 0.5 -> kappa = 0.3/0.5
        assert cohen_kappa(ConfusionMatrix(tp=40, tn=40, fp=10, fn=10)) == \
            pytest.approx(0.6, abs=1e-12)

    def test_chance_level_prediction(self):
        assert cohen_kappa(ConfusionMatrix(tp=25, fp=25, fn=25, tn=25)) == 0.0

    def test_degenerate_chance_agreement(self):
        # single cell: p_e == 1 -> defined as 0
        assert cohen_kappa(ConfusionMatrix(tp=10, tn=0, fp=0, fn=0)) == 0.0

    def test_class_swap_invariance(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            tp, tn, fp, fn = rng.integers(1, 50, 4)
            direct = cohen_kappa(ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn))
            swapped = cohen_kappa(ConfusionMatrix(tp=tn, tn=tp, fp=fn, fn=fp))
            assert direct == pytest.approx(swapped, abs=1e-12)


class TestBruteForceEquivalence:
    """Hand/brute-force recomputation of the scalar metrics."""

    def test_randomized_confusion_matrices(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            tp, tn, fp, fn = (int(v) for v in rng.integers(1, 80, 4))
            cm = ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn)
            n = tp + tn + fp + fn
            stats = confusion_stats(cm)
            assert stats["accuracy"] == pytest.approx((tp + tn) / n, abs=1e-12)
            assert stats["sensitivity"] == pytest.approx(tp / (tp + fn), abs=1e-12)
            assert stats["specificity"] == pytest.approx(tn / (tn + fp), abs=1e-12)
            p_o = (tp + tn) / n
            p_yes = ((tp + fp) / n) * ((tp + fn) / n)
            p_no = ((fn + tn) / n) * ((fp + tn) / n)
            expected = (p_o - (p_yes + p_no)) / (1 - (p_yes + p_no))
            assert cohen_kappa(cm) == pytest.approx(expected, abs=1e-12)


class TestTMetric:
    def test_paper_example(self):
        assert t_metric(0.5, 1.0) == pytest.approx(2 / 3, abs=5e-4)

    def test_identity(self):
        for x in (0.2, 0.55, 1.0):
            assert t_metric(x, x) == pytest.approx(x, abs=1e-12)

    def test_mode_collapse_sensitivity(self):
        assert t_metric(0.0, 1.0) == 0.0

    def test_bounded_by_arithmetic_mean(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a, b = rng.uniform(0, 1, 2)
            h = t_metric(a, b)
            assert h <= (a + b) / 2 + 1e-12
            if abs(a - b) > 1e-9:
                assert h < (a + b) / 2

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            t_metric(1.2, 0.5)


class TestTstrTrts:
    def test_identical_clean_data_high_score(self):
        windows = oracle_windows(noise=0.0)
        synth = windows[::2]
        real = windows[1::2]
        assert tstr(synth, real, FAST_CLASSIFIERS) >= 0.95

    def test_flipped_labels_low_score(self):
        windows = oracle_windows(noise=0.0)
        flipped = [
            Window(w.recording_id, w.index, w.values,
                   APNEIC if w.label == NON_APNEIC else NON_APNEIC)
            for w in windows[::2]
        ]
        assert tstr(flipped, windows[1::2], FAST_CLASSIFIERS) <= 0.5

    def test_symmetry_of_construction(self):
        windows = oracle_windows(noise=0.05)
        a, b = windows[::2], windows[1::2]
        assert trts(a, b, FAST_CLASSIFIERS) == tstr(a, b, FAST_CLASSIFIERS)

    def test_single_class_training_rejected(self):
        apneic_only = make_windows(10, label=APNEIC)
        with pytest.raises(ValueError, match="single class"):
            tstr(apneic_only, make_windows(10), FAST_CLASSIFIERS)

    def test_auroc_metric_option(self):
        windows = oracle_windows(noise=0.1)
        score = tstr(windows[::2], windows[1::2], FAST_CLASSIFIERS, metric="auroc")
        assert 0.5 <= score <= 1.0


class TestMmd:
    def test_constant_windows_exact_zero(self):
        w = [Window("c", i, np.full(8, 0.7), APNEIC) for i in range(2)]
        v = [Window("c", i + 2, np.full(8, 0.7), APNEIC) for i in range(2)]
        assert mmd2_unbiased(w, v, sigma=1.0) == 0.0

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(4)
        for trial in range(25):
            m, n = rng.integers(5, 30, 2)
            x = rng.standard_normal((m, 7))
            y = rng.standard_normal((n, 7)) + rng.uniform(-1, 1)
            sigma = rng.uniform(0.5, 3.0)
            assert mmd2_unbiased(x, y, sigma) == pytest.approx(
                mmd2_double_loop(x, y, sigma), abs=1e-12)

    def test_symmetry_exact(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((21, 9))
        y = rng.standard_normal((17, 9))
        assert mmd2_unbiased(x, y, 1.3) == mmd2_unbiased(y, x, 1.3)

    def test_same_class_below_cross_class(self):
        windows = oracle_windows(noise=0.1, hours=1.0)
        apneic = [w for w in windows if w.label == APNEIC]
        non = [w for w in windows if w.label == NON_APNEIC]
        sigma = median_heuristic_sigma(apneic, non)
        same = mmd2_unbiased(apneic[::2], apneic[1::2], sigma)
        cross = mmd2_unbiased(apneic, non, sigma)
        assert same < cross

    def test_invalid_sigma(self):
        with pytest.raises(ValueError, match="sigma"):
            mmd2_unbiased(np.ones((3, 2)), np.ones((3, 2)), 0.0)


class TestKernelOptimization:
    def test_identical_distributions_small_tstat(self):
        count = 0
        for seed in range(10):
            rng = np.random.default_rng(seed)
            a = rng.standard_normal((60, 10))
            b = rng.standard_normal((60, 10))
            sigma = optimize_kernel(a[:30], b[:30])
            if abs(mmd_t_statistic(a[30:], b[30:], sigma)) < 2.0:
                count += 1
        assert count >= 9

    def test_ascent_never_worsens_training_tstat(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((40, 8))
        b = rng.standard_normal((40, 8)) + 0.7
        init = median_heuristic_sigma(a, b)
        before = mmd_t_statistic(a, b, init)
        sigma = optimize_kernel(a, b, init_sigma=init)
        after = mmd_t_statistic(a, b, sigma)
        assert after >= before - 1e-12

    def test_sigma_scales_with_data(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((40, 8))
        b = rng.standard_normal((40, 8)) + 0.5
        s1 = optimize_kernel(a, b)
        s2 = optimize_kernel(2.0 * a, 2.0 * b)
        assert abs(s2 / s1 - 2.0) <= 0.4  # within 20% of doubling
        assert s1 > 0 and s2 > 0

    def test_distinct_distributions_large_tstat(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((60, 8))
        b = rng.standard_normal((60, 8)) + 1.0
        sigma = optimize_kernel(a[:30], b[:30])
        assert mmd_t_statistic(a[30:], b[30:], sigma) > 3.0


class TestWelchTTest:
    def test_clear_separation(self):
        rng = np.random.default_rng(0)
        b = rng.standard_normal(15)
        a = b + 100.0
        assert t_test_one_tailed(a, b) < 0.001

    def test_identical_samples(self):
        a = [1.0, 2.0, 3.0, 4.0]
        assert t_test_one_tailed(a, list(a)) == pytest.approx(0.5, abs=1e-9)

    def test_textbook_fixture_frozen_value(self):
        # reference p-value computed independently with scipy.stats.ttest_ind
        # (equal_var=False, alternative="greater"): 0.0125406544
        p = t_test_one_tailed([2.1, 2.5, 2.3, 2.2], [1.9, 2.0, 1.8, 2.1])
        assert p == pytest.approx(0.0125406544, abs=1e-6)

    def test_zero_variance_rejected(self):
        with pytest.raises(ValueError, match="zero variance"):
            t_test_one_tailed([1.0, 1.0], [1.0, 1.0])

    def test_wrong_direction_gives_large_p(self):
        assert t_test_one_tailed([1.0, 1.1, 0.9], [5.0, 5.1, 4.9]) > 0.99


class TestAggregate:
    def test_constant_values(self):
        assert aggregate([1.0, 1.0, 1.0]) == (1.0, 0.0)

    def test_two_values(self):
        mean, se = aggregate([0.0, 1.0])
        assert mean == 0.5
        assert se == pytest.approx(0.5)

    def test_single_value(self):
        assert aggregate([0.7]) == (0.7, 0.0)

    def test_spreadsheet_recomputation(self):
        rng = np.random.default_rng(11)
        values = rng.uniform(0.5, 0.9, 15)
        mean, se = aggregate(values)
        hand_mean = sum(values) / 15
        hand_var = sum((v - hand_mean) ** 2 for v in values) / 14
        assert mean == pytest.approx(hand_mean, abs=1e-12)
        assert se == pytest.approx(math.sqrt(hand_var) / math.sqrt(15), abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])


class TestQualityReport:
    def test_invariant_enforced(self):
        with pytest.raises(ValueError, match="harmonic"):
            QualityReport(tstr=0.5, trts=1.0, t_metric=0.75, mmd2=0.0, kernel_sigma=1.0)

    def test_evaluate_quality_bundle(self):
        windows = oracle_windows(noise=0.05, hours=1.0)
        real, synth = windows[::2], windows[1::2]
        report = evaluate_quality(real, synth, FAST_CLASSIFIERS, seed=1)
        assert report.t_metric == pytest.approx(
            t_metric(report.tstr, report.trts), abs=1e-12)
        assert report.kernel_sigma > 0
        # same underlying distribution: held-out mmd2 stays near zero
        assert abs(report.mmd2) < 0.05
