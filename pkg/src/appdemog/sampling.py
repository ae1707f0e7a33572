"""Binary labeling and class balancing of demographic records.

Each of the six demographic attributes maps to a two-class problem through a
named rule; users with a missing value for the attribute are excluded from
that problem only. Balancing undersamples the majority class so chance
accuracy is exactly 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DataFormatError, UnbalanceableError

ATTRIBUTES = ("gender", "age", "race", "married", "children", "income")


@dataclass(frozen=True)
class DemographicRecord:
    """One panelist's attributes; ``None`` marks a missing value."""

    user_row: int
    gender: Optional[str] = None
    age: Optional[int] = None
    race: Optional[str] = None
    married: Optional[str] = None
    children: Optional[int] = None
    income: Optional[int] = None

    def __post_init__(self):
        if self.age is not None and not 0 <= self.age <= 130:
            raise DataFormatError(f"age {self.age} outside [0, 130]")
        if self.children is not None and self.children < 0:
            raise DataFormatError(f"children {self.children} negative")


@dataclass(frozen=True)
class BinarizationRule:
    """Maps one attribute's raw values onto {positive, negative}.

    ``classify`` returns True/False for the two classes and None to exclude
    the user (only used for out-of-scope values such as panelists under 18).
    """

    attribute: str
    positive_class: str
    negative_class: str
    classify: Callable[[object], Optional[bool]] = field(repr=False)


def _gender(v):
    return str(v).strip().lower() == "male"


def _age(v):
    v = int(v)
    if v < 18:
        return None
    return v <= 32


def _race(v):
    return str(v).strip().lower() == "white"


def _married(v):
    return str(v).strip().lower() == "married"


def _children(v):
    return int(v) == 0


def _income(v):
    return int(v) <= 40_000


RULES: dict[str, BinarizationRule] = {
    "gender": BinarizationRule("gender", "male", "female", _gender),
    "age": BinarizationRule("age", "18-32", "33-100", _age),
    "race": BinarizationRule("race", "white", "non-white", _race),
    "married": BinarizationRule("married", "married", "single", _married),
    "children": BinarizationRule("children", "no children", ">=1 children", _children),
    "income": BinarizationRule("income", "<=$40K", ">$40K", _income),
}


@dataclass(frozen=True)
class LabeledSubset:
    """Rows of a dataset with binary labels, aligned elementwise."""

    row_indices: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        rows = np.ascontiguousarray(self.row_indices, dtype=np.int64)
        labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if rows.shape != labels.shape or rows.ndim != 1:
            raise DataFormatError("row_indices and labels must be aligned 1-D arrays")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise DataFormatError("labels must be 0/1")
        object.__setattr__(self, "row_indices", rows)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.row_indices)

    @property
    def n_pos(self) -> int:
        return int(self.labels.sum())

    @property
    def n_neg(self) -> int:
        return len(self) - self.n_pos


def _seedseq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def substream(seed, *key) -> np.random.SeedSequence:
    """Child seed derived by key, independent of call order or scheduling."""
    ss = _seedseq(seed)
    return np.random.SeedSequence(entropy=ss.entropy, spawn_key=ss.spawn_key + tuple(key))


def binarize(records: Sequence[DemographicRecord], rule: BinarizationRule) -> LabeledSubset:
    """Label every record with a non-missing value under `rule`."""
    if rule.attribute not in ATTRIBUTES:
        raise DataFormatError(f"unknown attribute {rule.attribute!r}")
    rows, labels = [], []
    for rec in records:
        value = getattr(rec, rule.attribute)
        if value is None:
            continue
        cls = rule.classify(value)
        if cls is None:
            continue
        rows.append(rec.user_row)
        labels.append(1 if cls else 0)
    return LabeledSubset(np.array(rows, dtype=np.int64), np.array(labels, dtype=np.uint8))


def balance(subset: LabeledSubset, seed) -> LabeledSubset:
    """Undersample the majority class to the minority count, then shuffle."""
    pos = np.nonzero(subset.labels == 1)[0]
    neg = np.nonzero(subset.labels == 0)[0]
    if len(pos) == 0 or len(neg) == 0:
        raise UnbalanceableError(
            f"cannot balance: {len(pos)} positive / {len(neg)} negative"
        )
    rng = np.random.default_rng(_seedseq(seed))
    m = min(len(pos), len(neg))
    if len(pos) > m:
        pos = rng.choice(pos, size=m, replace=False)
    if len(neg) > m:
        neg = rng.choice(neg, size=m, replace=False)
    order = rng.permutation(np.concatenate([pos, neg]))
    return LabeledSubset(subset.row_indices[order], subset.labels[order])


def balanced_subsample(subset: LabeledSubset, n_users: int, seed) -> LabeledSubset:
    """Draw exactly n_users/2 per class uniformly without replacement."""
    if n_users % 2 != 0 or n_users <= 0:
        raise UnbalanceableError(f"n_users must be positive and even, got {n_users}")
    half = n_users // 2
    pos = np.nonzero(subset.labels == 1)[0]
    neg = np.nonzero(subset.labels == 0)[0]
    if len(pos) < half or len(neg) < half:
        raise UnbalanceableError(
            f"need {half} per class, have {len(pos)} positive / {len(neg)} negative"
        )
    rng = np.random.default_rng(_seedseq(seed))
    take = np.concatenate(
        [rng.choice(pos, size=half, replace=False), rng.choice(neg, size=half, replace=False)]
    )
    order = rng.permutation(take)
    return LabeledSubset(subset.row_indices[order], subset.labels[order])
