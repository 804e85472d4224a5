import numpy as np
import pytest

from breathgan.data import APNEIC, NON_APNEIC, build_dataset, windowize, preprocess
from breathgan.gan import GanConfig, new_model, train
from breathgan.mixture import (
    MixturePlan,
    MixtureWeights,
    effective_mixture,
    make_plan,
    sample_subset,
    train_mixture,
)
from helpers import make_recording

SMALL_GAN = dict(hidden_size=8, minibatch_size=10, noise_dim=2, sequence_length=12,
                 epochs=2, checkpoint_every=2, seed=5)


def paired_corpus(n_severe=3, n_normal=3, n_windows=40):
    recordings = []
    for i in range(n_severe):
        labels = [APNEIC] * (n_windows * 3 // 4) + [NON_APNEIC] * (n_windows // 4)
        recordings.append(make_recording(rec_id=f"a{i:02d}", n_windows=n_windows,
                                         window_seconds=60, labels=labels, seed=i))
    for i in range(n_normal):
        labels = [APNEIC] * (n_windows // 10) + \
            [NON_APNEIC] * (n_windows - n_windows // 10)
        recordings.append(make_recording(rec_id=f"c{i:02d}", n_windows=n_windows,
                                         window_seconds=60, labels=labels, seed=10 + i))
    return recordings


class TestMakePlan:
    def test_three_pairs(self):
        plan = make_plan(paired_corpus(), k_sub=3, p=0.4)
        assert plan.k_sub == 3
        for subset in plan.subsets:
            assert len(subset) == 2
            assert any(rid.startswith("a") for rid in subset)
            assert any(rid.startswith("c") for rid in subset)
        flat = [rid for s in plan.subsets for rid in s]
        assert sorted(flat) == sorted(r.id for r in paired_corpus())

    def test_probability_vector(self):
        plan = make_plan(paired_corpus(), k_sub=3, p=0.4)
        assert np.allclose(plan.probability_vector(0), [0.4, 0.3, 0.3])
        assert np.allclose(plan.probability_vector(2), [0.3, 0.3, 0.4])
        assert plan.probability_vector(1).sum() == pytest.approx(1.0, abs=1e-12)

    def test_infeasible_pairing(self):
        recordings = paired_corpus(n_severe=4, n_normal=2)
        with pytest.raises(ValueError, match="infeasible"):
            make_plan(recordings, k_sub=3, p=0.4)

    def test_disjointness_enforced(self):
        with pytest.raises(ValueError, match="disjoint"):
            MixturePlan(subsets=[["a", "b"], ["b", "c"]], p=0.5)

    def test_invalid_p(self):
        with pytest.raises(ValueError, match="p must"):
            MixturePlan(subsets=[["a"]], p=0.0)


class TestSampleSubset:
    def test_p_one_always_own(self):
        plan = MixturePlan(subsets=[["a"], ["b"], ["c"]], p=1.0)
        rng = np.random.default_rng(0)
        assert all(sample_subset(plan, 1, rng) == 1 for _ in range(50))

    def test_single_subset_always_zero(self):
        plan = MixturePlan(subsets=[["a"]], p=1.0)
        rng = np.random.default_rng(0)
        assert all(sample_subset(plan, 0, rng) == 0 for _ in range(20))

    def test_monte_carlo_frequencies(self):
        plan = MixturePlan(subsets=[["a"], ["b"], ["c"]], p=0.4)
        rng = np.random.default_rng(123)
        draws = np.array([sample_subset(plan, 0, rng) for _ in range(30000)])
        freqs = np.bincount(draws, minlength=3) / len(draws)
        assert np.all(np.abs(freqs - np.array([0.4, 0.3, 0.3])) <= 0.01)


class TestEffectiveMixture:
    def test_paper_vector(self):
        plan = MixturePlan(subsets=[["a"], ["b"], ["c"]], p=0.4)
        assert np.allclose(effective_mixture(plan, 0).weights, [0.4, 0.3, 0.3])

    def test_one_hot(self):
        plan = MixturePlan(subsets=[["a"], ["b"]], p=1.0)
        assert np.allclose(effective_mixture(plan, 1).weights, [0.0, 1.0])

    def test_weights_sum_to_one(self):
        for k, p in ((2, 0.6), (4, 0.25), (5, 0.9)):
            plan = MixturePlan(subsets=[[f"r{i}"] for i in range(k)], p=p)
            for j in range(k):
                assert effective_mixture(plan, j).weights.sum() == pytest.approx(
                    1.0, abs=1e-12)

    def test_invalid_weights_rejected(self):
        with pytest.raises(ValueError):
            MixtureWeights(np.array([0.5, 0.6]))


class TestTrainMixture:
    def windows_by_recording(self, recordings):
        out = {}
        for rec in recordings:
            out[rec.id] = windowize(preprocess(rec))
        return out

    def small_pools(self):
        recs = [
            make_recording(rec_id="a00", n_windows=30, window_seconds=12,
                           labels=[APNEIC] * 20 + [NON_APNEIC] * 10, seed=1),
            make_recording(rec_id="c00", n_windows=30, window_seconds=12,
                           labels=[APNEIC] * 3 + [NON_APNEIC] * 27, seed=2),
        ]
        return self.windows_by_recording(recs)

    def test_degenerate_mixture_equals_plain_training(self):
        pools = self.small_pools()
        plan = MixturePlan(subsets=[["a00", "c00"]], p=1.0)
        cfg = GanConfig(**SMALL_GAN)
        (result,) = train_mixture(plan, pools, cfg)

        all_windows = pools["a00"] + pools["c00"]
        plain, _ = train(new_model(cfg), all_windows)
        mixture_params = np.concatenate(
            [p.data.ravel() for p in result.model.g_parameters()])
        plain_params = np.concatenate(
            [p.data.ravel() for p in plain.g_parameters()])
        assert np.array_equal(mixture_params, plain_params)

    def test_draw_log_accounting(self):
        pools = self.small_pools()
        plan = MixturePlan(subsets=[["a00"], ["c00"]], p=0.6)
        cfg = GanConfig(**{**SMALL_GAN, "epochs": 4})
        results = train_mixture(plan, pools, cfg)
        for j, res in enumerate(results):
            steps = max(1, len(pools[plan.subsets[j][0]]) // cfg.minibatch_size)
            assert sum(res.draw_counts) == cfg.epochs * steps

    @pytest.mark.slow
    def test_draw_frequencies_match_vector(self):
        recs = paired_corpus(n_severe=3, n_normal=3, n_windows=60)
        pools = {}
        for rec in recs:
            rec1hz = preprocess(rec)
            pools[rec.id] = windowize(rec1hz)
        plan = make_plan(recs, k_sub=3, p=0.4)
        cfg = GanConfig(hidden_size=6, minibatch_size=5, noise_dim=2,
                        sequence_length=60, epochs=40, checkpoint_every=40, seed=2)
        results = train_mixture(plan, pools, cfg)
        for j, res in enumerate(results):
            total = sum(res.draw_counts)
            freqs = np.array(res.draw_counts) / total
            expected = plan.probability_vector(j)
            # binomial three-sigma band per subset
            for f, p in zip(freqs, expected):
                sigma = np.sqrt(p * (1 - p) / total)
                assert abs(f - p) <= 3 * sigma + 1e-9

    def test_unknown_recording_rejected(self):
        plan = MixturePlan(subsets=[["zz"]], p=1.0)
        with pytest.raises(ValueError, match="unknown"):
            train_mixture(plan, self.small_pools(), GanConfig(**SMALL_GAN))

    def test_empty_subset_rejected(self):
        pools = {"a00": [], "c00": self.small_pools()["c00"]}
        plan = MixturePlan(subsets=[["a00"], ["c00"]], p=0.5)
        with pytest.raises(ValueError, match="no windows"):
            train_mixture(plan, pools, GanConfig(**SMALL_GAN))
