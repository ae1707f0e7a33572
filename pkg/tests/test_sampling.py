import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from appdemog.errors import DataFormatError, UnbalanceableError
from appdemog.sampling import (
    ATTRIBUTES,
    RULES,
    DemographicRecord,
    LabeledSubset,
    balance,
    balanced_subsample,
    binarize,
)


def rec(row, **kw):
    return DemographicRecord(user_row=row, **kw)


class TestRules:
    def test_age_30_is_positive(self):
        assert RULES["age"].classify(30) is True

    def test_age_33_is_negative(self):
        assert RULES["age"].classify(33) is False

    def test_age_under_18_excluded(self):
        assert RULES["age"].classify(17) is None

    def test_children_two_is_negative(self):
        assert RULES["children"].classify(2) is False

    def test_children_zero_is_positive(self):
        assert RULES["children"].classify(0) is True

    def test_income_boundary(self):
        assert RULES["income"].classify(40_000) is True
        assert RULES["income"].classify(40_001) is False

    def test_first_listed_class_is_positive(self):
        assert RULES["gender"].classify("male") is True
        assert RULES["race"].classify("white") is True
        assert RULES["married"].classify("married") is True

    @pytest.mark.parametrize("attr", ATTRIBUTES)
    def test_total_over_domain(self, attr):
        """Every in-domain non-missing value lands in exactly one class."""
        samples = {
            "gender": ["male", "female", "FEMALE"],
            "age": [18, 32, 33, 100],
            "race": ["white", "black", "asian"],
            "married": ["married", "single", "divorced"],
            "children": [0, 1, 5],
            "income": [0, 40_000, 40_001, 250_000],
        }[attr]
        for v in samples:
            assert RULES[attr].classify(v) in (True, False)


class TestBinarize:
    def test_missing_excluded(self):
        records = [rec(0, income=30_000), rec(1), rec(2, income=90_000)]
        sub = binarize(records, RULES["income"])
        assert sub.row_indices.tolist() == [0, 2]
        assert sub.labels.tolist() == [1, 0]

    def test_age_mapping(self):
        records = [rec(0, age=30), rec(1, age=40), rec(2, age=16)]
        sub = binarize(records, RULES["age"])
        assert sub.row_indices.tolist() == [0, 1]
        assert sub.labels.tolist() == [1, 0]

    def test_deterministic(self):
        records = [rec(i, gender="male" if i % 3 else "female") for i in range(20)]
        a = binarize(records, RULES["gender"])
        b = binarize(records, RULES["gender"])
        assert a.labels.tolist() == b.labels.tolist()

    def test_unknown_attribute(self):
        bad = RULES["gender"].__class__("height", "tall", "short", lambda v: True)
        with pytest.raises(DataFormatError):
            binarize([rec(0)], bad)


def _subset(n_pos, n_neg):
    labels = np.array([1] * n_pos + [0] * n_neg, dtype=np.uint8)
    return LabeledSubset(np.arange(n_pos + n_neg), labels)


class TestBalance:
    def test_already_balanced_keeps_everyone(self):
        out = balance(_subset(10, 10), seed=0)
        assert len(out) == 20
        assert out.n_pos == out.n_neg == 10

    def test_majority_undersampled(self):
        src = _subset(30, 10)
        out = balance(src, seed=1)
        assert out.n_pos == out.n_neg == 10
        assert set(out.row_indices.tolist()) <= set(src.row_indices.tolist())

    def test_same_seed_identical(self):
        src = _subset(25, 13)
        a, b = balance(src, seed=7), balance(src, seed=7)
        assert a.row_indices.tolist() == b.row_indices.tolist()
        assert a.labels.tolist() == b.labels.tolist()

    def test_empty_class_rejected(self):
        with pytest.raises(UnbalanceableError):
            balance(_subset(5, 0), seed=0)

    def test_label_mean_exactly_half(self):
        out = balance(_subset(31, 17), seed=3)
        assert float(out.labels.mean()) == 0.5


class TestBalancedSubsample:
    def test_174_gives_87_per_class(self):
        out = balanced_subsample(_subset(200, 150), 174, seed=0)
        assert len(out) == 174
        assert out.n_pos == out.n_neg == 87

    def test_full_size_is_permutation(self):
        src = _subset(12, 12)
        out = balanced_subsample(src, 24, seed=5)
        assert sorted(out.row_indices.tolist()) == sorted(src.row_indices.tolist())

    def test_two_users(self):
        out = balanced_subsample(_subset(9, 4), 2, seed=2)
        assert out.n_pos == out.n_neg == 1

    def test_insufficient_population(self):
        with pytest.raises(UnbalanceableError):
            balanced_subsample(_subset(5, 3), 8, seed=0)

    def test_odd_size_rejected(self):
        with pytest.raises(UnbalanceableError):
            balanced_subsample(_subset(5, 5), 3, seed=0)

    def test_no_fabricated_rows(self):
        src = _subset(40, 28)
        out = balanced_subsample(src, 30, seed=11)
        assert set(out.row_indices.tolist()) <= set(src.row_indices.tolist())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_subsample_coverage_property(seed):
    """Across many draws of half the pool every member eventually appears."""
    src = _subset(8, 8)
    seen: set[int] = set()
    for i in range(200):
        out = balanced_subsample(src, 8, seed=seed * 1000 + i)
        seen.update(out.row_indices.tolist())
        if len(seen) == 16:
            break
    assert len(seen) == 16


def test_record_validation():
    with pytest.raises(DataFormatError):
        DemographicRecord(user_row=0, age=190)
    with pytest.raises(DataFormatError):
        DemographicRecord(user_row=0, children=-1)
