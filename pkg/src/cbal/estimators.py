"""Class-probability estimators, loss matrices and the Bayes decision rule."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import logsumexp, softmax

KINDS = ("softmax_regression", "gaussian_nb", "bootstrap_ensemble")


class EstimatorError(ValueError):
    pass


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str = "gaussian_nb"
    learning_rate: float = 0.1
    l2: float = 1e-3
    max_epochs: int = 200
    tol: float = 1e-6
    var_floor: float = 1e-6
    ensemble_size: int = 10
    base: EstimatorSpec | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise EstimatorError(f"unknown estimator kind {self.kind!r}; expected one of {KINDS}")
        for name in ("learning_rate", "l2", "max_epochs", "tol", "var_floor"):
            if not getattr(self, name) > 0:
                raise EstimatorError(f"{name} must be strictly positive")
        if self.ensemble_size < 2:
            raise EstimatorError("ensemble_size must be at least 2")
        if self.base is not None and self.base.kind == "bootstrap_ensemble":
            raise EstimatorError("ensemble members cannot themselves be ensembles")

    @property
    def member_spec(self) -> EstimatorSpec:
        return self.base if self.base is not None else EstimatorSpec("gaussian_nb", var_floor=self.var_floor)

    def with_seed(self, seed: int) -> EstimatorSpec:
        return replace(self, seed=int(seed))


class FittedEstimator:
    """Immutable fitted model exposing ``predict_proba``."""

    kind: str
    K: int
    d: int

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X2 = X[None, :] if single else X
        if X2.ndim != 2 or X2.shape[1] != self.d:
            raise EstimatorError(f"expected feature dimension {self.d}, got {X.shape[-1] if X.ndim else 0}")
        P = self._proba(X2)
        return P[0] if single else P

    def _proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class SoftmaxModel(FittedEstimator):
    weights: np.ndarray
    bias: np.ndarray
    loss_history: tuple[float, ...] = ()
    kind: str = field(default="softmax_regression", init=False)

    @property
    def K(self):
        return self.weights.shape[1]

    @property
    def d(self):
        return self.weights.shape[0]

    def _proba(self, X):
        return softmax(X @ self.weights + self.bias, axis=1)


@dataclass(frozen=True, eq=False)
class GaussianNBModel(FittedEstimator):
    counts: np.ndarray  # (K,)
    means: np.ndarray  # (K, d)
    sq_dev: np.ndarray  # (K, d) sums of squared deviations from the class mean
    var_floor: float
    kind: str = field(default="gaussian_nb", init=False)

    @property
    def K(self):
        return self.means.shape[0]

    @property
    def d(self):
        return self.means.shape[1]

    @property
    def priors(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    @property
    def variances(self) -> np.ndarray:
        n = np.maximum(self.counts, 1)[:, None]
        return np.maximum(self.sq_dev / n, self.var_floor)

    def _proba(self, X):
        var = self.variances
        with np.errstate(divide="ignore"):
            log_prior = np.log(self.priors)
        log_lik = -0.5 * (
            np.log(2 * np.pi * var).sum(axis=1)[None, :]
            + (((X[:, None, :] - self.means[None]) ** 2) / var[None]).sum(axis=2)
        )
        joint = log_lik + log_prior
        return np.exp(joint - logsumexp(joint, axis=1, keepdims=True))

    def updated(self, x, k: int) -> GaussianNBModel:
        """One-point Welford update of class ``k``'s sufficient statistics."""
        counts = self.counts.copy()
        means = self.means.copy()
        sq_dev = self.sq_dev.copy()
        counts[k] += 1
        delta = x - means[k]
        means[k] = means[k] + delta / counts[k]
        sq_dev[k] = sq_dev[k] + delta * (x - means[k])
        return GaussianNBModel(counts, means, sq_dev, self.var_floor)


@dataclass(frozen=True, eq=False)
class EnsembleModel(FittedEstimator):
    members: tuple[FittedEstimator, ...]
    kind: str = field(default="bootstrap_ensemble", init=False)

    @property
    def K(self):
        return self.members[0].K

    @property
    def d(self):
        return self.members[0].d

    def member_proba(self, X) -> np.ndarray:
        """Stacked member distributions, shape (members, n, K)."""
        return np.stack([m.predict_proba(X) for m in self.members])

    def _proba(self, X):
        return self.member_proba(X).mean(axis=0)


def _check_training_set(X, y, K):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EstimatorError("empty training set")
    if y.shape != (X.shape[0],):
        raise EstimatorError("labels must be a vector matching the feature rows")
    if K < 2:
        raise EstimatorError("K must be at least 2")
    if y.min() < 0 or y.max() >= K:
        raise EstimatorError(f"label out of range 0..{K - 1}")
    return X, y


def softmax_objective(W, b, X, Y, l2):
    """L2-regularized mean cross-entropy and its gradient.

    ``Y`` is the one-hot label matrix; the bias is not regularized.
    Returns ``(loss, grad_W, grad_b)``.
    """
    logits = X @ W + b
    log_p = logits - logsumexp(logits, axis=1, keepdims=True)
    n = X.shape[0]
    loss = -(Y * log_p).sum() / n + 0.5 * l2 * (W * W).sum()
    residual = (np.exp(log_p) - Y) / n
    return loss, X.T @ residual + l2 * W, residual.sum(axis=0)


def _fit_softmax(spec: EstimatorSpec, X, y, K) -> SoftmaxModel:
    n, d = X.shape
    Y = np.eye(K)[y]
    W = np.zeros((d, K))
    b = np.zeros(K)
    # cap the step at 1/Lipschitz so every epoch is a descent step
    Xa = np.hstack([X, np.ones((n, 1))])
    lipschitz = 0.5 * np.linalg.norm(Xa, 2) ** 2 / n + spec.l2
    step = min(spec.learning_rate, 1.0 / lipschitz)
    loss, gW, gb = softmax_objective(W, b, X, Y, spec.l2)
    history = [loss]
    for _ in range(spec.max_epochs):
        W = W - step * gW
        b = b - step * gb
        new_loss, gW, gb = softmax_objective(W, b, X, Y, spec.l2)
        history.append(new_loss)
        converged = abs(loss - new_loss) < spec.tol
        loss = new_loss
        if converged:
            break
    return SoftmaxModel(W, b, tuple(history))


def _fit_gnb(spec: EstimatorSpec, X, y, K) -> GaussianNBModel:
    d = X.shape[1]
    counts = np.bincount(y, minlength=K).astype(float)
    means = np.zeros((K, d))
    sq_dev = np.zeros((K, d))
    for k in range(K):
        rows = X[y == k]
        if len(rows):
            means[k] = rows.mean(axis=0)
            sq_dev[k] = ((rows - means[k]) ** 2).sum(axis=0)
    return GaussianNBModel(counts, means, sq_dev, spec.var_floor)


def _fit_ensemble(spec: EstimatorSpec, X, y, K) -> EnsembleModel:
    base = spec.member_spec
    n = X.shape[0]
    members = []
    for child in np.random.SeedSequence(spec.seed).spawn(spec.ensemble_size):
        rng = np.random.default_rng(child)
        rows = rng.integers(0, n, size=n)
        members.append(fit(base.with_seed(int(rng.integers(2**31))), X[rows], y[rows], K))
    return EnsembleModel(tuple(members))


_FITTERS = {
    "softmax_regression": _fit_softmax,
    "gaussian_nb": _fit_gnb,
    "bootstrap_ensemble": _fit_ensemble,
}


def fit(spec: EstimatorSpec, features, labels, K: int) -> FittedEstimator:
    X, y = _check_training_set(features, labels, K)
    return _FITTERS[spec.kind](spec, X, y, K)


def refit_with(spec: EstimatorSpec, features, labels, K: int, x, k: int, base_model=None) -> FittedEstimator:
    """Model fit on the training set plus one extra row ``x`` labeled ``k``.

    For Gaussian NB, passing the already fitted ``base_model`` switches to a
    one-point sufficient-statistic update instead of a full refit.
    """
    x = np.asarray(x, dtype=float)
    if not 0 <= k < K:
        raise EstimatorError(f"label out of range 0..{K - 1}")
    if spec.kind == "gaussian_nb" and isinstance(base_model, GaussianNBModel):
        if x.shape != (base_model.d,):
            raise EstimatorError("dimension mismatch")
        return base_model.updated(x, k)
    X, y = _check_training_set(features, labels, K)
    return fit(spec, np.vstack([X, x[None, :]]), np.append(y, k), K)


class LossMatrix:
    """Decision losses: ``entries[i, j]`` is the loss of predicting ``i`` when the truth is ``j``."""

    def __init__(self, entries):
        L = np.array(entries, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1] or L.shape[0] < 2:
            raise EstimatorError("loss matrix must be square with K >= 2")
        if not np.all(np.isfinite(L)) or np.any(L < 0):
            raise EstimatorError("loss matrix entries must be finite and nonnegative")
        if np.any(np.diag(L) != 0):
            raise EstimatorError("loss matrix diagonal must be zero")
        if not np.any(L > 0):
            raise EstimatorError("loss matrix needs at least one positive off-diagonal entry")
        L.setflags(write=False)
        self.entries = L

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def zero_one(cls, K: int) -> LossMatrix:
        return cls(1.0 - np.eye(K))

    @classmethod
    def from_file(cls, path, K: int | None = None) -> LossMatrix:
        rows = [line.strip() for line in Path(path).read_text().splitlines() if line.strip()]
        try:
            entries = [[float(v) for v in row.split(",")] for row in rows]
        except ValueError as exc:
            raise EstimatorError(f"{path}: {exc}") from None
        if len({len(r) for r in entries}) != 1:
            raise EstimatorError(f"{path}: rows have different lengths")
        L = cls(entries)
        if K is not None and L.K != K:
            raise EstimatorError(f"{path}: loss matrix is {L.K}x{L.K} but the dataset has K={K}")
        return L

    def scaled(self, c: float) -> LossMatrix:
        return LossMatrix(self.entries * c)

    def expected_losses(self, P) -> np.ndarray:
        """Expected loss of every decision: ``sum_j P(j|x) L(y, j)`` for each ``y``."""
        return np.asarray(P) @ self.entries.T

    def __repr__(self):
        return f"LossMatrix({self.entries.tolist()})"


def bayes_decision(P, L: LossMatrix) -> np.ndarray:
    """Loss-minimizing class for each posterior row (ties go to the smaller class)."""
    return np.argmin(L.expected_losses(P), axis=-1)


def decide(model: FittedEstimator, x, L: LossMatrix):
    P = model.predict_proba(x)
    if L.K != model.K:
        raise EstimatorError("loss matrix and model disagree on K")
    out = bayes_decision(P, L)
    return int(out) if np.ndim(out) == 0 else out
