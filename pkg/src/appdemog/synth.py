"""Synthetic bag-of-apps dataset with planted, known demographic signal.

The generator plants independent per-app log-odds shifts for each attribute
(a naive-Bayes model given the label), which keeps the optimal classifier
in closed form: the package's experiment results can then be checked
against a Monte-Carlo estimate of the exact posterior classifier's
accuracy instead of unverifiable reference numbers.

Popularity follows a Zipf law rescaled to a target mean apps-per-user.
Signal apps are drawn proportionally to popularity from the apps below a
ubiquity cap (near-universal apps separate nothing), each attribute getting
a disjoint set, and shift magnitudes are matched to popularity rank within
the set: the strongest planted predictors are the ones with enough users
to matter, while rare signal apps get weak shifts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dimred import CategoryMap
from .errors import DataFormatError
from .sampling import ATTRIBUTES, DemographicRecord, substream
from .sparse import SparseBinaryMatrix

_PROB_FLOOR = 1e-9
_USAGE_CHUNK = 512


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 3760
    n_apps: int = 8840
    zipf_exponent: float = 1.2
    mean_apps_per_user: float = 82.6
    signal_fraction: float = 0.05
    signal_strength: float = 1.5
    signal_popularity_cap: float = 0.10
    missing_rate: float = 0.02
    min_users_per_app: int = 10
    n_categories: int = 48
    max_usage_prob: float = 0.98

    def __post_init__(self):
        if self.n_users < 1 or self.n_apps < 1 or self.n_categories < 1:
            raise DataFormatError("counts must be >= 1")
        for name in ("signal_fraction", "missing_rate", "signal_popularity_cap"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise DataFormatError(f"{name} must be in [0, 1], got {v}")
        if self.signal_strength < 0:
            raise DataFormatError("signal_strength must be >= 0")
        if not 0 < self.max_usage_prob < 1:
            raise DataFormatError("max_usage_prob must be in (0, 1)")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise DataFormatError(f"unknown synth config fields: {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class AttributeTruth:
    """Planted signal for one attribute over the surviving apps."""

    delta: np.ndarray  # log-odds shift per app, 0 off the signal set
    labels: np.ndarray  # true binary label per user

    @property
    def signal_cols(self) -> np.ndarray:
        return np.nonzero(self.delta != 0.0)[0]


@dataclass(frozen=True)
class GroundTruth:
    base_probs: np.ndarray  # per-app usage probability for label 0
    per_attribute: dict[str, AttributeTruth]

    def to_dict(self) -> dict:
        return {
            "base_probs": self.base_probs.tolist(),
            "per_attribute": {
                a: {"delta": t.delta.tolist(), "labels": t.labels.tolist()}
                for a, t in self.per_attribute.items()
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GroundTruth":
        return cls(
            base_probs=np.asarray(doc["base_probs"], dtype=np.float64),
            per_attribute={
                a: AttributeTruth(
                    delta=np.asarray(t["delta"], dtype=np.float64),
                    labels=np.asarray(t["labels"], dtype=np.uint8),
                )
                for a, t in doc["per_attribute"].items()
            },
        )


@dataclass(frozen=True)
class SyntheticDataset:
    matrix: SparseBinaryMatrix
    records: list[DemographicRecord]
    app_names: list[str]
    categories: CategoryMap
    truth: GroundTruth
    user_ids: list[str] = field(default_factory=list)


def zipf_usage_probs(n_apps: int, exponent: float, target_mean: float, cap: float) -> np.ndarray:
    """Zipf-shaped usage probabilities rescaled so they sum to `target_mean`.

    Head apps are clamped at `cap` and the remaining mass is redistributed
    over the free apps (iterated until no new app exceeds the cap).
    """
    base = np.arange(1, n_apps + 1, dtype=np.float64) ** (-exponent)
    if target_mean > cap * n_apps:
        raise DataFormatError("target mean apps/user unreachable under the usage cap")
    clamped = np.zeros(n_apps, dtype=bool)
    for _ in range(n_apps):
        free = ~clamped
        scale = (target_mean - cap * clamped.sum()) / base[free].sum()
        q = base * scale
        newly = (q > cap) & free
        if not newly.any():
            return np.where(clamped, cap, q)
        clamped |= newly
    raise DataFormatError("usage probability rescaling failed to settle")


def _logit(p: np.ndarray) -> np.ndarray:
    return np.log(p) - np.log1p(-p)


def _sigma(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _clamp_prob(p: np.ndarray) -> np.ndarray:
    return np.clip(p, _PROB_FLOOR, 1.0 - _PROB_FLOOR)


def generate(cfg: SynthConfig, seed) -> SyntheticDataset:
    """Draw a full synthetic dataset; byte-identical for equal (cfg, seed)."""
    q = zipf_usage_probs(cfg.n_apps, cfg.zipf_exponent, cfg.mean_apps_per_user, cfg.max_usage_prob)
    logit_q = _logit(q)

    n_signal = int(round(cfg.signal_fraction * cfg.n_apps))
    eligible = np.nonzero(q < cfg.signal_popularity_cap)[0]
    if n_signal * len(ATTRIBUTES) > len(eligible):
        raise DataFormatError(
            "not enough apps below the popularity cap for disjoint signal sets"
        )

    labels: dict[str, np.ndarray] = {}
    deltas: dict[str, np.ndarray] = {}
    assigned = np.zeros(cfg.n_apps, dtype=bool)
    total_shift_by_label: list[np.ndarray] = []
    for a_idx, attr in enumerate(ATTRIBUTES):
        rng_lab = np.random.default_rng(substream(seed, 1, a_idx))
        labels[attr] = (rng_lab.random(cfg.n_users) < 0.5).astype(np.uint8)
        rng_sig = np.random.default_rng(substream(seed, 2, a_idx))
        pool = eligible[~assigned[eligible]]
        pw = q[pool] / q[pool].sum()
        chosen = pool[rng_sig.choice(len(pool), size=n_signal, replace=False, p=pw)]
        assigned[chosen] = True
        mags = np.abs(rng_sig.uniform(-cfg.signal_strength, cfg.signal_strength, n_signal))
        signs = np.where(rng_sig.random(n_signal) < 0.5, 1.0, -1.0)
        by_pop = chosen[np.argsort(-q[chosen], kind="stable")]
        delta = np.zeros(cfg.n_apps)
        delta[by_pop] = np.sort(mags)[::-1] * signs
        deltas[attr] = delta

    rng_x = np.random.default_rng(substream(seed, 3))
    rows_acc: list[np.ndarray] = []
    cols_acc: list[np.ndarray] = []
    label_mat = np.stack([labels[a] for a in ATTRIBUTES]).astype(np.float64)  # 6 x users
    delta_mat = np.stack([deltas[a] for a in ATTRIBUTES])  # 6 x apps
    for start in range(0, cfg.n_users, _USAGE_CHUNK):
        stop = min(start + _USAGE_CHUNK, cfg.n_users)
        shift = label_mat[:, start:stop].T @ delta_mat  # chunk x apps
        probs = _clamp_prob(_sigma(logit_q[None, :] + shift))
        hits = rng_x.random((stop - start, cfg.n_apps)) < probs
        r, c = np.nonzero(hits)
        rows_acc.append(r + start)
        cols_acc.append(c)
    all_rows = np.concatenate(rows_acc)
    all_cols = np.concatenate(cols_acc)

    support = np.bincount(all_cols, minlength=cfg.n_apps)
    kept = np.nonzero(support >= cfg.min_users_per_app)[0]
    if len(kept) == 0:
        raise DataFormatError("no app survived the minimum-user filter")
    remap = np.full(cfg.n_apps, -1, dtype=np.int64)
    remap[kept] = np.arange(len(kept))
    mask = remap[all_cols] >= 0
    pairs = np.stack([all_rows[mask], remap[all_cols[mask]]], axis=1)
    matrix = SparseBinaryMatrix.from_triplets(pairs, cfg.n_users, len(kept))

    truth = GroundTruth(
        base_probs=q[kept],
        per_attribute={
            a: AttributeTruth(delta=deltas[a][kept], labels=labels[a]) for a in ATTRIBUTES
        },
    )

    width = len(str(cfg.n_apps))
    app_names = [f"app_{j + 1:0{width}d}" for j in kept.tolist()]
    rng_cat = np.random.default_rng(substream(seed, 4))
    cat_ids = rng_cat.integers(0, cfg.n_categories, size=len(kept), dtype=np.int32)
    cat_width = len(str(cfg.n_categories))
    categories = CategoryMap(
        category_ids=cat_ids,
        names=tuple(f"category_{c + 1:0{cat_width}d}" for c in range(cfg.n_categories)),
    )

    records = _realize_records(cfg, seed, labels)
    user_width = len(str(cfg.n_users))
    user_ids = [f"user_{i + 1:0{user_width}d}" for i in range(cfg.n_users)]
    return SyntheticDataset(matrix, records, app_names, categories, truth, user_ids)


def _realize_records(cfg, seed, labels) -> list[DemographicRecord]:
    n = cfg.n_users
    rng = np.random.default_rng(substream(seed, 5))
    values: dict[str, list] = {}
    values["gender"] = np.where(labels["gender"] == 1, "male", "female").tolist()
    values["age"] = np.where(
        labels["age"] == 1,
        rng.integers(18, 33, size=n),
        rng.integers(33, 101, size=n),
    ).tolist()
    other_races = rng.choice(["black", "asian", "hispanic", "other"], size=n)
    values["race"] = np.where(labels["race"] == 1, "white", other_races).tolist()
    values["married"] = np.where(labels["married"] == 1, "married", "single").tolist()
    values["children"] = np.where(
        labels["children"] == 1, 0, rng.integers(1, 6, size=n)
    ).tolist()
    values["income"] = np.where(
        labels["income"] == 1,
        rng.integers(5, 41, size=n) * 1000,
        rng.integers(41, 201, size=n) * 1000,
    ).tolist()
    missing: dict[str, np.ndarray] = {}
    for a_idx, attr in enumerate(ATTRIBUTES):
        rng_m = np.random.default_rng(substream(seed, 6, a_idx))
        missing[attr] = rng_m.random(n) < cfg.missing_rate
    records = []
    for i in range(n):
        kwargs = {}
        for attr in ATTRIBUTES:
            kwargs[attr] = None if missing[attr][i] else values[attr][i]
        records.append(DemographicRecord(user_row=i, **kwargs))
    return records


@dataclass(frozen=True)
class BayesEstimate:
    accuracy: float
    standard_error: float
    n_mc: int


def bayes_accuracy(
    truth: GroundTruth, attribute: str, n_mc: int = 200_000, seed: int = 0
) -> BayesEstimate:
    """Monte-Carlo accuracy of the exact posterior classifier for one attribute.

    Under the generative model the log posterior odds of the positive class
    given a usage row x is sum_j x_j * [logit p1_j - logit p0_j] +
    sum_j log((1-p1_j)/(1-p0_j)) with p0 = sigma(logit q), p1 =
    sigma(logit q + delta); only signal apps contribute. Fresh users are
    drawn from the model and classified by the sign of the log odds (ties
    predict positive).
    """
    if attribute not in truth.per_attribute:
        raise DataFormatError(f"unknown attribute {attribute!r}")
    if n_mc < 1000:
        raise DataFormatError("n_mc must be at least 1000")
    att = truth.per_attribute[attribute]
    sig = att.signal_cols
    delta = att.delta[sig]
    lq = _logit(_clamp_prob(truth.base_probs[sig]))
    p0 = _clamp_prob(_sigma(lq))
    p1 = _clamp_prob(_sigma(lq + delta))
    weight = _logit(p1) - _logit(p0)
    const = float(np.sum(np.log1p(-p1) - np.log1p(-p0)))
    rng = np.random.default_rng(substream(seed, 7))
    n_pos = n_mc // 2
    correct = 0
    for y_bit, count in ((1, n_pos), (0, n_mc - n_pos)):
        p_use = p1 if y_bit == 1 else p0
        done = 0
        while done < count:
            chunk = min(20_000, count - done)
            if len(sig):
                x = rng.random((chunk, len(sig))) < p_use
                llr = x @ weight + const
            else:
                llr = np.full(chunk, const)
            pred_pos = llr >= 0
            correct += int(np.sum(pred_pos == bool(y_bit)))
            done += chunk
    acc = correct / n_mc
    se = math.sqrt(acc * (1.0 - acc) / n_mc)
    return BayesEstimate(accuracy=acc, standard_error=se, n_mc=n_mc)
