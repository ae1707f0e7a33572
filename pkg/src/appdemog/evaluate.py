"""Evaluation protocols: cross-validation, ROC/AUC, coverage, curves, bins.

Every protocol takes a master seed and derives per-task substreams by
counter keys, so reports are byte-identical regardless of thread count or
scheduling. Thread parallelism (capped by ``APPDEMOG_THREADS``) only
distributes independent fold/repetition tasks.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DataFormatError
from .logreg import FeatureMatrix, TrainConfig, predict_proba, take_rows, train
from .sampling import LabeledSubset, balanced_subsample, substream
from .stats import TTestResult, proportion_se, welch_t_test


def thread_count() -> int:
    env = os.environ.get("APPDEMOG_THREADS", "")
    if env.strip():
        try:
            n = int(env)
        except ValueError as exc:
            raise DataFormatError(f"APPDEMOG_THREADS must be an integer, got {env!r}") from exc
        return max(1, n)
    return os.cpu_count() or 1


def _parallel_map(fn, n_tasks: int) -> list:
    """Map fn over task indices; output order fixed by index, not schedule."""
    workers = min(thread_count(), max(1, n_tasks))
    if workers == 1:
        return [fn(i) for i in range(n_tasks)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(n_tasks)))


@dataclass(frozen=True)
class RocReport:
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "thresholds": self.thresholds.tolist(),
            "fpr": self.fpr.tolist(),
            "tpr": self.tpr.tolist(),
        }


def roc_auc(scores, labels) -> RocReport:
    """ROC curve over distinct thresholds and the trapezoid AUC.

    Ties share one curve point, so the trapezoid area equals the
    Mann-Whitney statistic P(s+ > s-) + 0.5 P(s+ = s-).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DataFormatError("scores and labels must be aligned 1-D arrays")
    n_pos = int(np.sum(labels == 1))
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataFormatError("ROC needs both classes present")
    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    y_sorted = labels[order] == 1
    distinct = np.nonzero(np.diff(s_sorted))[0]
    block_ends = np.concatenate([distinct, [len(s_sorted) - 1]])
    tp = np.cumsum(y_sorted)[block_ends]
    fp = block_ends + 1 - tp
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    thresholds = np.concatenate([[np.inf], s_sorted[block_ends]])
    auc = float(np.trapezoid(tpr, fpr))
    return RocReport(thresholds=thresholds, fpr=fpr, tpr=tpr, auc=auc)


def confidence_coverage(scores, labels, coverage: float) -> float:
    """Accuracy over the ceil(coverage*n) users with scores farthest from 0.5.

    Ties in confidence are broken by original position; class predictions
    follow the 0.5-threshold convention (ties positive).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(scores) == 0:
        raise DataFormatError("confidence_coverage needs at least one score")
    if not 0 < coverage <= 1:
        raise DataFormatError(f"coverage must be in (0, 1], got {coverage}")
    take = int(np.ceil(coverage * len(scores)))
    order = np.argsort(-np.abs(scores - 0.5), kind="stable")[:take]
    correct = (scores[order] >= 0.5) == (labels[order] == 1)
    return float(np.mean(correct))


@dataclass(frozen=True)
class CvReport:
    fold_accuracies: list[float]
    mean_accuracy: float
    auc: float
    rows: np.ndarray  # dataset row of each scored user
    labels: np.ndarray
    scores: np.ndarray
    fold_of: np.ndarray

    def correctness(self) -> np.ndarray:
        return ((self.scores >= 0.5) == (self.labels == 1)).astype(np.uint8)

    def to_dict(self) -> dict:
        return {
            "fold_accuracies": self.fold_accuracies,
            "mean_accuracy": self.mean_accuracy,
            "auc": self.auc,
            "rows": self.rows.tolist(),
            "labels": self.labels.tolist(),
            "scores": self.scores.tolist(),
            "fold_of": self.fold_of.tolist(),
        }


def stratified_fold_ids(labels: np.ndarray, k: int, seed) -> np.ndarray:
    """Deterministic class-stratified fold assignment.

    Members of each class are shuffled and dealt to folds by a running
    counter, which balances both fold sizes and per-fold class counts to
    within one and supports any k up to the number of users (leave-one-out).
    """
    n = len(labels)
    if k < 2:
        raise DataFormatError(f"k must be >= 2, got {k}")
    if k > n:
        raise DataFormatError(f"k={k} exceeds {n} users")
    fold_of = np.empty(n, dtype=np.int64)
    rng = np.random.default_rng(substream(seed, 11))
    counter = 0
    for cls in (1, 0):
        members = np.nonzero(labels == cls)[0]
        if len(members) < 2:
            raise DataFormatError(f"class {cls} too small to stratify ({len(members)})")
        members = rng.permutation(members)
        for m in members:
            fold_of[m] = counter % k
            counter += 1
    return fold_of


def kfold_cv(
    X: FeatureMatrix,
    labeled: LabeledSubset,
    k: int,
    cfg: TrainConfig = TrainConfig(),
    seed=0,
) -> CvReport:
    """Stratified k-fold cross-validation with pooled out-of-fold scoring."""
    fold_of = stratified_fold_ids(labeled.labels, k, seed)
    Xsub = take_rows(X, labeled.row_indices)
    y = labeled.labels.astype(np.float64)

    def run_fold(f: int):
        test = np.nonzero(fold_of == f)[0]
        tr = np.nonzero(fold_of != f)[0]
        model = train(take_rows(Xsub, tr), y[tr], cfg)
        s = predict_proba(model, take_rows(Xsub, test))
        correct = (s >= 0.5) == (y[test] == 1)
        return test, s, float(np.mean(correct)) if len(test) else float("nan")

    results = _parallel_map(run_fold, k)
    scores = np.empty(len(y))
    for test, s, _ in results:
        scores[test] = s
    fold_accuracies = [acc for _, _, acc in results]
    auc = roc_auc(scores, labeled.labels).auc
    return CvReport(
        fold_accuracies=fold_accuracies,
        mean_accuracy=float(np.mean(fold_accuracies)),
        auc=auc,
        rows=labeled.row_indices.copy(),
        labels=labeled.labels.copy(),
        scores=scores,
        fold_of=fold_of,
    )


@dataclass(frozen=True)
class CurveReport:
    xs: list[float]
    means: list[float]
    dispersions: list[float]  # std-dev for curves, standard error for bins
    counts: list[int]
    dispersion_kind: str = "std"
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "xs": self.xs,
            "means": self.means,
            "dispersions": self.dispersions,
            "counts": self.counts,
            "dispersion_kind": self.dispersion_kind,
            **self.extra,
        }


def _subsample_accuracy(X, labeled, size, protocol, cfg, stream) -> float:
    sub = balanced_subsample(labeled, size, substream(stream, 21))
    if protocol == "holdout":
        chosen = np.isin(labeled.row_indices, sub.row_indices)
        rest = LabeledSubset(labeled.row_indices[~chosen], labeled.labels[~chosen])
        if len(rest) == 0:
            raise DataFormatError("holdout protocol needs users left outside the subsample")
        model = train(take_rows(X, sub.row_indices), sub.labels.astype(np.float64), cfg)
        s = predict_proba(model, take_rows(X, rest.row_indices))
        return float(np.mean((s >= 0.5) == (rest.labels == 1)))
    if protocol.startswith("cv"):
        k = int(protocol[2:])
        report = kfold_cv(X, sub, k, cfg, substream(stream, 22))
        return report.mean_accuracy
    raise DataFormatError(f"unknown protocol {protocol!r}; use 'holdout' or 'cv<k>'")


def learning_curve(
    X: FeatureMatrix,
    labeled: LabeledSubset,
    sizes: Sequence[int],
    reps: int,
    protocol: str = "holdout",
    cfg: TrainConfig = TrainConfig(),
    seed=0,
) -> CurveReport:
    """Mean and std-dev of accuracy over balanced subsamples per train size.

    The default protocol trains on the subsample and scores the remainder
    of the balanced pool; ``cv<k>`` instead runs k-fold CV inside each
    subsample (used by the fixed-size benchmark).
    """
    sizes = [int(s) for s in sizes]
    if reps < 1:
        raise DataFormatError("reps must be >= 1")
    tasks = [(si, r) for si in range(len(sizes)) for r in range(reps)]

    def run(task_idx: int) -> float:
        si, r = tasks[task_idx]
        stream = substream(seed, 31, si, r)
        return _subsample_accuracy(X, labeled, sizes[si], protocol, cfg, stream)

    flat = _parallel_map(run, len(tasks))
    means, stds = [], []
    for si in range(len(sizes)):
        accs = np.array(flat[si * reps : (si + 1) * reps])
        means.append(float(accs.mean()))
        stds.append(float(accs.std(ddof=1)) if reps > 1 else 0.0)
    return CurveReport(
        xs=[float(s) for s in sizes],
        means=means,
        dispersions=stds,
        counts=[reps] * len(sizes),
        dispersion_kind="std",
        extra={"protocol": protocol},
    )


def benchmark_174(
    X: FeatureMatrix,
    labeled: LabeledSubset,
    reps: int = 300,
    seed=0,
    cfg: TrainConfig = TrainConfig(),
    n_users: int = 174,
) -> CurveReport:
    """Mean +/- std accuracy of 2-fold CV over `reps` subsamples of 174 users."""
    return learning_curve(
        X, labeled, sizes=[n_users], reps=reps, protocol="cv2", cfg=cfg, seed=seed
    )


def app_count_bins(per_user: Sequence[tuple[int, int]], edges: Sequence[int]) -> CurveReport:
    """Accuracy and sqrt(p(1-p)/n) standard error per app-count bin.

    `per_user` holds (app_count, correct) pairs, typically pooled over all
    attributes' out-of-fold predictions. Bins are [edge_i, edge_{i+1});
    every count must fall inside one bin. Empty bins report n=0 and a NaN
    accuracy.
    """
    edges = [int(e) for e in edges]
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise DataFormatError("edges must be strictly increasing with >= 2 entries")
    counts = np.array([c for c, _ in per_user], dtype=np.int64)
    correct = np.array([v for _, v in per_user], dtype=np.float64)
    if len(counts) and (counts.min() < edges[0] or counts.max() >= edges[-1]):
        raise DataFormatError(
            f"app counts must fall within [{edges[0]}, {edges[-1]}); "
            f"got range [{counts.min()}, {counts.max()}]"
        )
    xs, means, ses, ns = [], [], [], []
    for lo, hi in zip(edges, edges[1:]):
        mask = (counts >= lo) & (counts < hi)
        n = int(mask.sum())
        xs.append((lo + hi) / 2.0)
        ns.append(n)
        if n == 0:
            means.append(float("nan"))
            ses.append(float("nan"))
        else:
            p = float(correct[mask].mean())
            means.append(p)
            ses.append(proportion_se(p, n))
    return CurveReport(
        xs=xs,
        means=means,
        dispersions=ses,
        counts=ns,
        dispersion_kind="se",
        extra={"edges": edges},
    )


DEFAULT_BIN_EDGES = (0, 20, 35, 50, 75, 100, 150, 250, 10_000)


def accuracy_drop_test(
    per_user: Sequence[tuple[int, int]],
    mid_range: tuple[int, int] = (50, 150),
    high_min: int = 150,
) -> TTestResult:
    """Welch test of whether mid-app-count users beat high-app-count users.

    Group a: users with app counts in [mid_range[0], mid_range[1]]; group b:
    counts strictly above `high_min`. One-sided alternative mean(a) > mean(b).
    """
    a = [v for c, v in per_user if mid_range[0] <= c <= mid_range[1]]
    b = [v for c, v in per_user if c > high_min]
    return welch_t_test(a, b)
