import json

import numpy as np
import pytest

from breathgan.classifiers import (
    ClassifierSpec,
    classifier_from_doc,
    classifier_to_doc,
    default_classifier_set,
    evaluate,
    fit,
    predict,
    predict_score,
)
from breathgan.data import APNEIC, NON_APNEIC, Window, build_dataset
from breathgan.oracle import OracleRecordingSpec, OracleSpec, generate_corpus
from helpers import make_windows

ALL_KINDS = ("knn", "rf", "mlp", "svm")


def clean_oracle_windows(seed=6, hours=0.5):
    spec = OracleSpec(
        seed=seed,
        sample_rate_hz=4,
        window_seconds=60,
        recordings=[
            OracleRecordingSpec("a", hours=hours, apneic_fraction=0.5,
                                noise_std=0.0, subject_phase=0.0),
            OracleRecordingSpec("b", hours=hours, apneic_fraction=0.4,
                                noise_std=0.0, subject_phase=1.3),
        ],
    )
    return build_dataset(generate_corpus(spec)).windows


class TestFitContracts:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_noise_free_oracle_training_accuracy(self, kind):
        windows = clean_oracle_windows()
        clf = fit(ClassifierSpec(kind, seed=1), windows)
        preds = predict(clf, windows)
        acc = np.mean([p == w.label for p, w in zip(preds, windows)])
        assert acc >= 0.99

    def test_knn_stores_training_set(self):
        windows = make_windows(8, label=APNEIC) + make_windows(8, label=NON_APNEIC,
                                                               rec_id="v", seed=2)
        clf = fit(ClassifierSpec("knn"), windows)
        assert clf.x.shape == (16, 12)
        assert len(clf.y) == 16

    def test_rf_same_seed_identical_forests(self):
        windows = clean_oracle_windows(hours=0.25)
        a = fit(ClassifierSpec("rf", seed=9), windows)
        b = fit(ClassifierSpec("rf", seed=9), windows)
        x = np.stack([w.values for w in windows])
        assert np.array_equal(a.tree_votes(x), b.tree_votes(x))

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_single_class_rejected(self, kind):
        windows = make_windows(12, label=APNEIC)
        with pytest.raises(ValueError, match="single class"):
            fit(ClassifierSpec(kind), windows)

    def test_inconsistent_window_lengths_rejected(self):
        windows = make_windows(4, length=10, label=APNEIC) + make_windows(
            4, length=12, label=NON_APNEIC, rec_id="v")
        with pytest.raises(ValueError, match="lengths"):
            fit(ClassifierSpec("knn"), windows)

    def test_predict_length_mismatch_rejected(self):
        windows = make_windows(4, length=10, label=APNEIC) + make_windows(
            4, length=10, label=NON_APNEIC, rec_id="v")
        clf = fit(ClassifierSpec("knn"), windows)
        with pytest.raises(ValueError, match="length"):
            predict(clf, make_windows(2, length=12))


class TestKnnRules:
    def test_zero_distance_dominates_any_k(self):
        rng = np.random.default_rng(3)
        xs = rng.uniform(-1, 1, (9, 6))
        windows = [Window("t", i, xs[i], APNEIC if i == 0 else NON_APNEIC)
                   for i in range(9)]
        clf = fit(ClassifierSpec("knn", params={"n_neighbors": 9}), windows)
        # probe point coincides with the single apneic training point
        probe = [Window("p", 0, xs[0], NON_APNEIC)]
        assert predict(clf, probe) == [APNEIC]

    def test_k1_training_point_is_its_own_label(self):
        windows = make_windows(5, label=APNEIC) + make_windows(
            5, label=NON_APNEIC, rec_id="v", seed=4)
        clf = fit(ClassifierSpec("knn", params={"n_neighbors": 1}), windows)
        assert predict(clf, windows) == [w.label for w in windows]


class TestForestRules:
    def test_prediction_is_majority_of_tree_votes(self):
        windows = clean_oracle_windows(hours=0.25)
        clf = fit(ClassifierSpec("rf", seed=2), windows)
        x = np.stack([w.values for w in windows])
        votes = clf.tree_votes(x).sum(axis=0)
        expected = votes > len(clf.trees) - votes
        assert np.array_equal(clf.predict_mask(x), expected)

    def test_constant_data_predicts_majority_class(self):
        values = np.zeros(8)
        windows = [Window("t", i, values, NON_APNEIC) for i in range(7)] + [
            Window("t", 7 + i, values, APNEIC) for i in range(3)]
        clf = fit(ClassifierSpec("rf", seed=1), windows)
        assert set(predict(clf, windows)) == {NON_APNEIC}

    def test_tied_vote_breaks_to_non_apneic(self):
        windows = clean_oracle_windows(hours=0.25)
        clf = fit(ClassifierSpec("rf", seed=2), windows)
        half = len(clf.trees) // 2
        x = np.stack([windows[0].values])
        votes = np.zeros((len(clf.trees), 1), dtype=bool)
        votes[:half] = True  # exactly half the trees vote apneic
        clf_votes = clf.tree_votes
        try:
            clf.tree_votes = lambda _x: votes
            assert clf.predict_mask(x)[0] == False  # noqa: E712
        finally:
            clf.tree_votes = clf_votes


class TestSvmRules:
    def test_kkt_satisfied_at_convergence(self):
        windows = clean_oracle_windows()
        clf = fit(ClassifierSpec("svm", seed=5), windows)
        assert clf.kkt_fraction() >= 0.99

    def test_gamma_follows_scale_heuristic(self):
        windows = clean_oracle_windows(hours=0.25)
        clf = fit(ClassifierSpec("svm", seed=5), windows)
        x = np.stack([w.values for w in windows])
        assert clf.gamma == pytest.approx(1.0 / (x.shape[1] * x.var()))


class TestMlpRules:
    def test_loss_decreases_on_clean_oracle(self):
        windows = clean_oracle_windows(hours=0.25)
        clf = fit(ClassifierSpec("mlp", seed=7), windows)
        assert clf.loss_history[-1] < clf.loss_history[0]

    def test_same_seed_same_weights(self):
        windows = clean_oracle_windows(hours=0.25)
        a = fit(ClassifierSpec("mlp", seed=8), windows)
        b = fit(ClassifierSpec("mlp", seed=8), windows)
        assert np.array_equal(a.w1.data, b.w1.data)
        assert np.array_equal(a.w2.data, b.w2.data)


class TestEvaluateAndParams:
    def test_perfect_predictor_confusion(self):
        windows = clean_oracle_windows(hours=0.25)
        clf = fit(ClassifierSpec("knn"), windows)
        cm = evaluate(clf, windows)
        assert cm.fp == 0 and cm.fn == 0
        assert cm.tp + cm.tn == len(windows)

    def test_effective_params_appendix_values(self):
        windows = clean_oracle_windows(hours=0.25)
        expectations = {
            "knn": {"n_neighbors": 5, "metric": "euclidean", "weights": "distance"},
            "rf": {"n_trees": 50, "criterion": "gini", "max_features": "sqrt"},
            "mlp": {"hidden_units": 100, "optimizer": "adam",
                    "learning_rate": 0.001, "batch_size": 200, "activation": "relu"},
            "svm": {"kernel": "rbf", "c": 1.0, "tol": 1e-3},
        }
        for spec in default_classifier_set(seed=0):
            clf = fit(spec, windows)
            params = clf.effective_params()
            for key, value in expectations[spec.kind].items():
                assert params[key] == value, (spec.kind, key)

    def test_unknown_kind_and_params(self):
        with pytest.raises(ValueError):
            ClassifierSpec("xgboost")
        with pytest.raises(ValueError):
            ClassifierSpec("knn", params={"bogus": 1})

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_serialization_round_trip(self, kind, tmp_path):
        windows = clean_oracle_windows(hours=0.25)
        clf = fit(ClassifierSpec(kind, seed=3), windows)
        doc = json.loads(json.dumps(classifier_to_doc(clf)))
        back = classifier_from_doc(doc)
        probe = windows[::3]
        assert predict(back, probe) == predict(clf, probe)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_scores_are_finite(self, kind):
        windows = clean_oracle_windows(hours=0.25)
        clf = fit(ClassifierSpec(kind, seed=3), windows)
        scores = predict_score(clf, windows)
        assert np.all(np.isfinite(scores))
