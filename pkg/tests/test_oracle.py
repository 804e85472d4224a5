import numpy as np
import pytest

from breathgan.classifiers import ClassifierSpec, fit, predict
from breathgan.data import APNEIC, NON_APNEIC, build_dataset, preprocess, windowize
from breathgan.oracle import (
    OracleRecordingSpec,
    OracleSpec,
    generate_corpus,
    oracle_density_distance,
)
from helpers import make_windows


def spec_of(recordings, seed=5, rate=20, window_seconds=60):
    return OracleSpec(seed=seed, recordings=recordings,
                      sample_rate_hz=rate, window_seconds=window_seconds)


class TestGenerateCorpus:
    def test_zero_fraction_all_non_apneic(self):
        spec = spec_of([OracleRecordingSpec("r", hours=0.5, apneic_fraction=0.0)])
        (rec,) = generate_corpus(spec)
        assert all(l == NON_APNEIC for l in rec.labels)

    def test_paper_mirror_fraction(self):
        spec = spec_of(
            [OracleRecordingSpec("r", hours=1000 / 60.0, apneic_fraction=0.378)])
        (rec,) = generate_corpus(spec)
        assert len(rec.labels) == 1000
        assert sum(1 for l in rec.labels if l == APNEIC) == 378

    def test_deterministic(self):
        spec = spec_of([OracleRecordingSpec("r", hours=0.25, apneic_fraction=0.4,
                                            noise_std=0.2)])
        (a,) = generate_corpus(spec)
        (b,) = generate_corpus(spec)
        assert np.array_equal(a.samples, b.samples)
        assert a.labels == b.labels

    def test_invalid_fraction_rejected(self):
        with pytest.raises(ValueError, match="apneic_fraction"):
            OracleRecordingSpec("r", hours=1.0, apneic_fraction=1.5)

    def test_apneic_windows_have_suppressed_center(self):
        spec = spec_of([OracleRecordingSpec("r", hours=0.5, apneic_fraction=0.5,
                                            apnea_amp_drop=1.0, noise_std=0.0)])
        (rec,) = generate_corpus(spec)
        for w in windowize(preprocess(rec)):
            center = np.abs(w.values[20:40])
            if w.label == APNEIC:
                assert center.max() < 0.2
            else:
                assert center.max() > 0.5


class TestDensityDistance:
    def test_identical_sets_zero(self):
        a = make_windows(30, seed=1)
        assert oracle_density_distance(a, list(a)) == 0.0

    def test_disjoint_supports_maximal(self):
        a = make_windows(25, seed=1, offset=0.0)
        b = make_windows(25, seed=2, offset=10.0)
        assert oracle_density_distance(a, b) == pytest.approx(2.0)

    def test_same_distribution_closer_than_cross_class(self):
        spec = spec_of(
            [OracleRecordingSpec("r", hours=2.0, apneic_fraction=0.5, noise_std=0.1)],
            seed=3)
        (rec,) = generate_corpus(spec)
        windows = windowize(preprocess(rec))
        apneic = [w for w in windows if w.label == APNEIC]
        non = [w for w in windows if w.label == NON_APNEIC]
        # two halves of the same class vs the cross-class distance
        same = oracle_density_distance(apneic[::2], apneic[1::2])
        cross = oracle_density_distance(apneic, non)
        assert same < cross


class TestOracleProperties:
    def test_noise_free_classes_are_1nn_separable(self):
        spec = spec_of(
            [
                OracleRecordingSpec("a", hours=1.0, apneic_fraction=0.5,
                                    noise_std=0.0, subject_phase=0.0),
                OracleRecordingSpec("b", hours=1.0, apneic_fraction=0.4,
                                    noise_std=0.0, subject_phase=1.0),
            ],
            seed=6)
        ds = build_dataset(generate_corpus(spec))
        windows = ds.windows
        train, held = windows[::2], windows[1::2]
        clf = fit(ClassifierSpec("knn", params={"n_neighbors": 1}), train)
        preds = predict(clf, held)
        assert all(p == w.label for p, w in zip(preds, held))

    def test_subject_phase_distinguishes_mean_waveforms(self):
        recs = [
            OracleRecordingSpec("a", hours=0.5, apneic_fraction=0.0,
                                noise_std=0.05, subject_phase=0.0),
            OracleRecordingSpec("b", hours=0.5, apneic_fraction=0.0,
                                noise_std=0.05, subject_phase=1.5),
        ]
        corpus = generate_corpus(spec_of(recs, seed=9))
        means = []
        for rec in corpus:
            ws = windowize(preprocess(rec))
            means.append(np.mean([w.values for w in ws], axis=0))
        assert np.linalg.norm(means[0] - means[1]) > 0.1
