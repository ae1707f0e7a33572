import numpy as np
import pytest

from appdemog.errors import DataFormatError
from appdemog.logreg import TrainConfig, train
from appdemog.sampling import ATTRIBUTES, RULES, balance, binarize
from appdemog.synth import SynthConfig, bayes_accuracy, generate, zipf_usage_probs
from oracles import pairwise_auc

SMALL = SynthConfig(n_users=700, n_apps=900)


@pytest.fixture(scope="module")
def small_ds():
    return generate(SMALL, seed=41)


class TestZipfProbs:
    def test_sums_to_target(self):
        q = zipf_usage_probs(500, 1.2, 40.0, 0.98)
        assert float(q.sum()) == pytest.approx(40.0, rel=1e-9)

    def test_within_bounds(self):
        q = zipf_usage_probs(500, 1.2, 40.0, 0.98)
        assert q.max() <= 0.98 + 1e-12
        assert q.min() > 0

    def test_unreachable_target_rejected(self):
        with pytest.raises(DataFormatError):
            zipf_usage_probs(10, 1.2, 20.0, 0.9)


class TestGenerate:
    def test_same_seed_byte_identical(self):
        a = generate(SMALL, seed=5)
        b = generate(SMALL, seed=5)
        assert a.matrix.col_indices.tolist() == b.matrix.col_indices.tolist()
        assert a.matrix.row_offsets.tolist() == b.matrix.row_offsets.tolist()
        assert [r for r in a.records] == [r for r in b.records]
        for attr in ATTRIBUTES:
            np.testing.assert_array_equal(
                a.truth.per_attribute[attr].delta, b.truth.per_attribute[attr].delta
            )

    def test_different_seed_differs(self):
        a = generate(SMALL, seed=5)
        b = generate(SMALL, seed=6)
        assert a.matrix.col_indices.tolist() != b.matrix.col_indices.tolist()

    def test_mean_apps_per_user_near_target(self, small_ds):
        # law of large numbers on the configured sum of usage probabilities;
        # the rare-app filter can only remove a thin slice
        mean = float(small_ds.matrix.row_counts().mean())
        assert abs(mean - SMALL.mean_apps_per_user) <= 0.1 * SMALL.mean_apps_per_user

    def test_rare_apps_filtered(self, small_ds):
        assert int(small_ds.matrix.column_support().min()) >= SMALL.min_users_per_app

    def test_zero_strength_means_zero_shifts(self):
        ds = generate(SynthConfig(n_users=300, n_apps=400, signal_strength=0.0), seed=1)
        for attr in ATTRIBUTES:
            assert np.all(ds.truth.per_attribute[attr].delta == 0.0)

    def test_labels_recoverable_from_records(self, small_ds):
        """Binarizing realized records reproduces the planted labels."""
        for attr in ATTRIBUTES:
            sub = binarize(small_ds.records, RULES[attr])
            truth_labels = small_ds.truth.per_attribute[attr].labels
            assert len(sub) >= 0.9 * len(small_ds.records)  # only missing dropped
            np.testing.assert_array_equal(sub.labels, truth_labels[sub.row_indices])

    def test_signal_sets_disjoint_across_attributes(self, small_ds):
        seen: set[int] = set()
        for attr in ATTRIBUTES:
            cols = set(small_ds.truth.per_attribute[attr].signal_cols.tolist())
            assert not (cols & seen)
            seen |= cols

    def test_category_map_covers_all_apps(self, small_ds):
        assert len(small_ds.categories.category_ids) == small_ds.matrix.n_cols
        assert small_ds.categories.n_categories == SMALL.n_categories

    def test_app_names_unique(self, small_ds):
        assert len(set(small_ds.app_names)) == len(small_ds.app_names)


@pytest.fixture(scope="module")
def paper_ds():
    return generate(SynthConfig(), seed=404)


class TestPaperScaleInvariants:
    def test_label_marginals(self, paper_ds):
        for attr in ATTRIBUTES:
            rate = float(paper_ds.truth.per_attribute[attr].labels.mean())
            assert 0.47 <= rate <= 0.53

    def test_scale(self, paper_ds):
        assert paper_ds.matrix.n_rows == 3760
        mean = float(paper_ds.matrix.row_counts().mean())
        assert abs(mean - 82.6) <= 8.26


class TestBayesAccuracy:
    def test_no_signal_floor(self):
        ds = generate(SynthConfig(n_users=300, n_apps=400, signal_strength=0.0), seed=2)
        est = bayes_accuracy(ds.truth, "gender", n_mc=20_000, seed=0)
        assert abs(est.accuracy - 0.5) <= 3 * max(est.standard_error, 1e-9) + 1e-12

    def test_single_decisive_app_gives_three_quarters(self):
        from appdemog.synth import AttributeTruth, GroundTruth

        truth = GroundTruth(
            base_probs=np.array([0.5]),
            per_attribute={
                "gender": AttributeTruth(
                    delta=np.array([30.0]), labels=np.zeros(2, dtype=np.uint8)
                )
            },
        )
        est = bayes_accuracy(truth, "gender", n_mc=100_000, seed=3)
        # exact enumeration: positives always use the app and are always right;
        # negatives use it half the time and are wrong exactly then
        assert est.accuracy == pytest.approx(0.75, abs=4 * est.standard_error)

    def test_stable_across_seeds(self):
        ds = generate(SMALL, seed=10)
        a = bayes_accuracy(ds.truth, "age", n_mc=40_000, seed=1)
        b = bayes_accuracy(ds.truth, "age", n_mc=40_000, seed=2)
        assert abs(a.accuracy - b.accuracy) <= 4 * (a.standard_error + b.standard_error)

    def test_monotone_in_signal_strength(self):
        prev = 0.45
        for strength in (0.0, 0.5, 1.0, 1.5):
            ds = generate(
                SynthConfig(n_users=500, n_apps=600, signal_strength=strength), seed=7
            )
            est = bayes_accuracy(ds.truth, "gender", n_mc=30_000, seed=0)
            assert est.accuracy >= prev - 3 * est.standard_error
            prev = est.accuracy

    def test_small_mc_rejected(self):
        ds = generate(SynthConfig(n_users=300, n_apps=400), seed=2)
        with pytest.raises(DataFormatError):
            bayes_accuracy(ds.truth, "gender", n_mc=10)

    def test_unknown_attribute(self):
        ds = generate(SynthConfig(n_users=300, n_apps=400), seed=2)
        with pytest.raises(DataFormatError):
            bayes_accuracy(ds.truth, "height")


def test_signal_apps_get_larger_coefficients(small_ds):
    """Planted apps outrank popularity-matched noise apps by |coefficient|."""
    att = small_ds.truth.per_attribute["gender"]
    pool = balance(binarize(small_ds.records, RULES["gender"]), seed=3)
    X = small_ds.matrix.select("rows", pool.row_indices)
    model = train(X, pool.labels.astype(np.float64), TrainConfig(lam=1.0))
    support = small_ds.matrix.column_support()
    sig = att.signal_cols
    non_sig = np.setdiff1d(np.arange(small_ds.matrix.n_cols), sig)
    non_sig_by_support = non_sig[np.argsort(support[non_sig], kind="stable")]
    sorted_ns_support = support[non_sig_by_support]
    matched = non_sig_by_support[
        np.clip(np.searchsorted(sorted_ns_support, support[sig]), 0, len(non_sig) - 1)
    ]
    w = np.abs(model.weights)
    scores = np.concatenate([w[sig], w[matched]])
    flags = np.concatenate([np.ones(len(sig)), np.zeros(len(matched))])
    assert pairwise_auc(scores, flags) > 0.6


def test_config_dict_roundtrip():
    cfg = SynthConfig(n_users=123, signal_strength=0.7)
    again = SynthConfig.from_dict(cfg.to_dict())
    assert again == cfg
    with pytest.raises(DataFormatError):
        SynthConfig.from_dict({"not_a_field": 1})


def test_config_validation():
    with pytest.raises(DataFormatError):
        SynthConfig(signal_fraction=1.5)
    with pytest.raises(DataFormatError):
        SynthConfig(n_users=0)
