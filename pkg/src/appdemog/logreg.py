"""L2-regularized binary logistic regression on sparse binary features.

The objective is the sum-form negative log-likelihood plus (lam/2)*||w||^2
with an unregularized intercept, minimized by limited-memory BFGS with an
Armijo backtracking line search from a zero start. Feature matrices may be
`SparseBinaryMatrix` or plain dense float arrays (used for the reduced
feature paths); both run through identical scoring semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import DataFormatError, DegenerateLabelsError
from .sparse import SparseBinaryMatrix

FeatureMatrix = Union[SparseBinaryMatrix, np.ndarray]


def _shape(X: FeatureMatrix) -> tuple[int, int]:
    if isinstance(X, SparseBinaryMatrix):
        return X.n_rows, X.n_cols
    X = np.asarray(X)
    if X.ndim != 2:
        raise DataFormatError("dense feature matrix must be 2-D")
    return X.shape


def _mv(X: FeatureMatrix, v: np.ndarray) -> np.ndarray:
    if isinstance(X, SparseBinaryMatrix):
        return X.matvec(v)
    return np.asarray(X, dtype=np.float64) @ v


def _rmv(X: FeatureMatrix, u: np.ndarray) -> np.ndarray:
    if isinstance(X, SparseBinaryMatrix):
        return X.transpose_matvec(u)
    return np.asarray(X, dtype=np.float64).T @ u


def take_rows(X: FeatureMatrix, rows: np.ndarray) -> FeatureMatrix:
    if isinstance(X, SparseBinaryMatrix):
        return X.select("rows", rows)
    return np.asarray(X, dtype=np.float64)[rows]


def sigmoid(m: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    m = np.asarray(m, dtype=np.float64)
    out = np.empty_like(m)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    e = np.exp(m[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _softplus(m: np.ndarray) -> np.ndarray:
    # log(1 + exp(m)) without overflow
    return np.maximum(m, 0.0) + np.log1p(np.exp(-np.abs(m)))


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 1.0
    max_iterations: int = 500
    gradient_tolerance: float = 1e-6
    seed: int = 0  # reserved for randomized starts; the default start is zero

    def __post_init__(self):
        if self.lam < 0:
            raise DataFormatError(f"lam must be non-negative, got {self.lam}")
        if self.max_iterations < 1:
            raise DataFormatError("max_iterations must be >= 1")
        if self.gradient_tolerance <= 0:
            raise DataFormatError("gradient_tolerance must be positive")


@dataclass(frozen=True)
class LogRegModel:
    weights: np.ndarray
    intercept: float
    lam: float
    trained_on: tuple[int, int]
    converged: bool = True
    n_iterations: int = 0

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if not np.all(np.isfinite(w)) or not np.isfinite(self.intercept):
            raise DataFormatError("model parameters must be finite")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)


def _check_labels(y) -> np.ndarray:
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise DataFormatError("labels must be a 1-D array")
    if y.size and not np.isin(y, (0.0, 1.0)).all():
        raise DataFormatError("labels must be 0/1")
    return y


def nll_and_gradient(
    model: LogRegModel, X: FeatureMatrix, y
) -> tuple[float, np.ndarray, float]:
    """Objective value and its exact gradient at `model`.

    loss = sum_i [log(1+exp(m_i)) - y_i m_i] + (lam/2)||w||^2 with margins
    m = Xw + b; the intercept is not penalized.
    """
    y = _check_labels(y)
    n, d = _shape(X)
    if y.shape != (n,) or model.weights.shape != (d,):
        raise DataFormatError(
            f"shape mismatch: X {n}x{d}, y {y.shape}, weights {model.weights.shape}"
        )
    m = _mv(X, model.weights) + model.intercept
    loss = float(np.sum(_softplus(m) - y * m) + 0.5 * model.lam * model.weights @ model.weights)
    r = sigmoid(m) - y
    grad_w = _rmv(X, r) + model.lam * model.weights
    return loss, grad_w, float(r.sum())


def _objective(theta, X, y, lam):
    d = theta.shape[0] - 1
    w, b = theta[:d], theta[d]
    m = _mv(X, w) + b
    loss = float(np.sum(_softplus(m) - y * m) + 0.5 * lam * w @ w)
    r = sigmoid(m) - y
    grad = np.empty_like(theta)
    grad[:d] = _rmv(X, r) + lam * w
    grad[d] = r.sum()
    return loss, grad


def train(X: FeatureMatrix, y, cfg: TrainConfig = TrainConfig()) -> LogRegModel:
    """Fit the model by L-BFGS until the gradient max-norm meets tolerance.

    Deterministic given (X, y, cfg). If the iteration budget runs out the
    best iterate seen is returned with ``converged=False``.
    """
    y = _check_labels(y)
    n, d = _shape(X)
    if y.shape != (n,):
        raise DataFormatError(f"X has {n} rows but y has {y.shape}")
    if n < 2 or len(np.unique(y)) < 2:
        raise DegenerateLabelsError("training needs at least one user per class")

    memory = 10
    theta = np.zeros(d + 1)
    f, g = _objective(theta, X, y, cfg.lam)
    best_theta, best_f = theta, f
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        if np.max(np.abs(g)) <= cfg.gradient_tolerance:
            converged = True
            it -= 1
            break
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, yv, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * yv
        if y_hist:
            gamma = (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
            q *= gamma
        for (s, yv, rho), a in zip(
            zip(s_hist, y_hist, rho_hist), reversed(alphas)
        ):
            beta = rho * (yv @ q)
            q += (a - beta) * s
        p = -q
        gTp = g @ p
        if gTp >= 0:  # not a descent direction; restart from steepest descent
            p = -g
            gTp = g @ p
            s_hist, y_hist, rho_hist = [], [], []
        step = 1.0 if y_hist else min(1.0, 1.0 / max(1.0, np.max(np.abs(g))))
        f_new, g_new, theta_new = f, g, theta
        ok = False
        for _ in range(60):
            theta_new = theta + step * p
            f_new, g_new = _objective(theta_new, X, y, cfg.lam)
            if f_new <= f + 1e-4 * step * gTp:
                ok = True
                break
            step *= 0.5
        if not ok:
            break  # no further progress at float resolution
        s_vec = theta_new - theta
        y_vec = g_new - g
        sy = s_vec @ y_vec
        if sy > 1e-12 * float(np.linalg.norm(s_vec) * np.linalg.norm(y_vec)):
            s_hist.append(s_vec)
            y_hist.append(y_vec)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        theta, f, g = theta_new, f_new, g_new
        if f < best_f:
            best_theta, best_f = theta, f
    else:
        it = cfg.max_iterations
    if not converged and np.max(np.abs(g)) <= cfg.gradient_tolerance:
        converged = True
    final = theta if converged else best_theta
    return LogRegModel(
        weights=final[:d],
        intercept=float(final[d]),
        lam=cfg.lam,
        trained_on=(n, d),
        converged=converged,
        n_iterations=it,
    )


def predict_proba(model: LogRegModel, X: FeatureMatrix) -> np.ndarray:
    """Positive-class probabilities sigma(Xw + b)."""
    n, d = _shape(X)
    if model.weights.shape != (d,):
        raise DataFormatError(f"model has {model.weights.shape[0]} weights, X has {d} columns")
    return sigmoid(_mv(X, model.weights) + model.intercept)


def predict(model: LogRegModel, X: FeatureMatrix) -> np.ndarray:
    """Predicted classes; probability 0.5 predicts positive."""
    return (predict_proba(model, X) >= 0.5).astype(np.uint8)


@dataclass(frozen=True)
class PredictorRow:
    app_name: str
    coefficient: float
    share: float
    n: int


@dataclass(frozen=True)
class PredictorTable:
    rows: tuple[PredictorRow, ...]

    def names(self) -> list[str]:
        return [r.app_name for r in self.rows]

    def to_dicts(self) -> list[dict]:
        return [
            {"app_name": r.app_name, "coefficient": r.coefficient, "share": r.share, "n": r.n}
            for r in self.rows
        ]


def top_coefficients(
    model: LogRegModel,
    X: FeatureMatrix,
    y,
    names: Sequence[str],
    k: int,
) -> tuple[PredictorTable, PredictorTable]:
    """Strongest positive and negative predictors with usage statistics.

    The positive table holds the k largest coefficients >= 0 in descending
    order, the negative table the k smallest <= 0 in ascending order; equal
    coefficients are ordered by app index. Share is the fraction of the
    app's users labeled positive and n the app's user count in (X, y); apps
    unused in X are omitted (their share is undefined).
    """
    y = _check_labels(y)
    n, d = _shape(X)
    if len(names) != d:
        raise DataFormatError(f"{len(names)} names for {d} columns")
    k = min(int(k), d)
    if isinstance(X, SparseBinaryMatrix):
        support = X.column_support().astype(np.float64)
        pos_count = X.transpose_matvec(y)
    else:
        Xd = np.asarray(X, dtype=np.float64)
        used = (Xd != 0).astype(np.float64)
        support = used.sum(axis=0)
        pos_count = used.T @ y
    w = model.weights
    idx = np.arange(d)
    usable = support > 0

    def build(side_idx) -> PredictorTable:
        rows = []
        for j in side_idx[:k]:
            rows.append(
                PredictorRow(
                    app_name=str(names[j]),
                    coefficient=float(w[j]),
                    share=float(pos_count[j] / support[j]),
                    n=int(support[j]),
                )
            )
        return PredictorTable(tuple(rows))

    pos_side = idx[usable & (w >= 0)]
    pos_side = pos_side[np.lexsort((pos_side, -w[pos_side]))]
    neg_side = idx[usable & (w <= 0)]
    neg_side = neg_side[np.lexsort((neg_side, w[neg_side]))]
    return build(pos_side), build(neg_side)


def model_to_json(model: LogRegModel, app_names: Sequence[str]) -> str:
    """Serialize with 17-significant-digit weights for exact round-trips."""
    import json

    if len(app_names) != model.weights.shape[0]:
        raise DataFormatError("app_names length must match weights")
    weights = ", ".join(f"{w:.17g}" for w in model.weights)
    return (
        "{\n"
        f'  "lambda": {model.lam:.17g},\n'
        f'  "intercept": {model.intercept:.17g},\n'
        f'  "weights": [{weights}],\n'
        f'  "app_names": {json.dumps(list(map(str, app_names)))},\n'
        f'  "trained_on": {{"users": {model.trained_on[0]}, "apps": {model.trained_on[1]}}}\n'
        "}\n"
    )


def model_from_json(text: str) -> tuple[LogRegModel, list[str]]:
    import json

    doc = json.loads(text)
    model = LogRegModel(
        weights=np.array(doc["weights"], dtype=np.float64),
        intercept=float(doc["intercept"]),
        lam=float(doc["lambda"]),
        trained_on=(int(doc["trained_on"]["users"]), int(doc["trained_on"]["apps"])),
    )
    return model, list(doc["app_names"])
