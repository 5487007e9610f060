"""Instance utility scores, two-stage CBAL selection and baseline query strategies."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist, pdist
from scipy.stats import entropy as shannon_entropy

from .estimators import (
    EnsembleModel,
    EstimatorSpec,
    FittedEstimator,
    GaussianNBModel,
    LossMatrix,
    refit_with,
)

# config name -> baseline kind
STRATEGIES = {
    "cbal": "cbal",
    "random": "random",
    "entropy": "entropy",
    "margin": "margin",
    "coreset": "kcenter_greedy",
    "bald": "ensemble_disagreement",
}
BASELINE_KINDS = ("random", "entropy", "margin", "kcenter_greedy", "ensemble_disagreement")


class StrategyError(ValueError):
    pass


def _top(scores, idx, count: int) -> np.ndarray:
    """Positions of the ``count`` largest scores; ties go to the smaller index."""
    order = np.lexsort((np.asarray(idx), -np.asarray(scores)))
    return order[:count]


# --- first stage: uncertainty x density ------------------------------------


def uncertainty(dist, literal: bool = False):
    """Margin-based uncertainty ``1 - (P(l1) - P(l2))`` of one or more posteriors.

    With ``literal=True`` the raw top-2 margin is returned instead (high means
    confident), which is only useful for ablations.
    """
    P = np.asarray(dist, dtype=float)
    if P.shape[-1] < 2:
        raise StrategyError("uncertainty needs K >= 2")
    top2 = np.sort(P, axis=-1)[..., -2:]
    margin = top2[..., 1] - top2[..., 0]
    u = margin if literal else 1.0 - margin
    u = np.clip(u, 0.0, 1.0)
    return float(u) if u.ndim == 0 else u


@dataclass(frozen=True)
class KernelSpec:
    """RBF kernel; ``bandwidth`` is a positive float or ``"median"``."""

    bandwidth: float | str = "median"

    def __post_init__(self):
        bw = self.bandwidth
        if isinstance(bw, str):
            if bw != "median":
                try:
                    bw = float(bw)
                except ValueError:
                    raise StrategyError(f"bandwidth must be a positive number or 'median', got {bw!r}") from None
                object.__setattr__(self, "bandwidth", bw)
        if not isinstance(self.bandwidth, str) and not self.bandwidth > 0:
            raise StrategyError("bandwidth must be positive")

    def resolve(self, X, seed: int = 0) -> float:
        if self.bandwidth == "median":
            return resolve_bandwidth(X, seed=seed)
        return float(self.bandwidth)


def resolve_bandwidth(X, max_points: int = 500, seed: int = 0) -> float:
    """Median pairwise Euclidean distance (1.0 if the median is zero)."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise StrategyError("median heuristic needs at least two points")
    if X.shape[0] > max_points:
        rows = np.random.default_rng(seed).choice(X.shape[0], size=max_points, replace=False)
        X = X[np.sort(rows)]
    med = float(np.median(pdist(X)))
    return med if med > 0 else 1.0


def rbf(A, B, sigma: float) -> np.ndarray:
    return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * sigma**2))


def _sigma(kernel, X, seed=0) -> float:
    if not isinstance(kernel, KernelSpec):
        return float(kernel)
    if kernel.bandwidth != "median":
        return float(kernel.bandwidth)
    return kernel.resolve(X, seed=seed) if len(X) >= 2 else 1.0


def correlation(i: int, pool: Sequence[int], features, kernel) -> float:
    """Mean RBF similarity of row ``i`` to every row in ``pool`` (self included).

    ``kernel`` is a KernelSpec (resolved on the pool) or a bandwidth.
    """
    pool = list(pool)
    if not pool:
        raise StrategyError("empty pool")
    if i not in pool:
        raise StrategyError(f"instance {i} is not in the pool")
    X = np.asarray(features)
    return float(rbf(X[[i]], X[pool], _sigma(kernel, X[pool])).mean())


def pool_densities(pool: Sequence[int], features, sigma: float) -> np.ndarray:
    """``correlation`` for every member of ``pool`` at once."""
    X = np.asarray(features)[list(pool)]
    return rbf(X, X, sigma).mean(axis=1)


@dataclass(frozen=True)
class UtilityScores:
    indices: np.ndarray
    u: np.ndarray
    c: np.ndarray

    @property
    def i_score(self) -> np.ndarray:
        return self.u * self.c

    def ranking(self) -> np.ndarray:
        """Dataset indices in descending informativeness."""
        return self.indices[_top(self.i_score, self.indices, len(self.indices))]


def utility_scores(model: FittedEstimator, pool: Sequence[int], features, kernel: KernelSpec,
                   seed: int = 0, literal: bool = False) -> UtilityScores:
    idx = np.asarray(list(pool), dtype=np.int64)
    X = np.asarray(features)
    if len(idx) == 0:
        raise StrategyError("empty unlabeled pool")
    sigma = _sigma(kernel, X[idx], seed=seed)
    u = np.asarray(uncertainty(model.predict_proba(X[idx]), literal=literal))
    c = pool_densities(idx, X, sigma)
    return UtilityScores(idx, u, c)


def select_candidates(model: FittedEstimator, pool, features, kernel: KernelSpec, B: int,
                      seed: int = 0, eligible=None, literal: bool = False) -> list[int]:
    """Move the top-``B`` unlabeled instances by ``u * c`` into the candidate set.

    ``pool`` is a PoolState. Densities are computed over the whole unlabeled
    set; ``eligible`` optionally restricts which instances may become
    candidates (used to exclude unaffordable rows under a cost budget).
    Returns the candidates in descending score order.
    """
    if B < 1:
        raise StrategyError("B must be at least 1")
    scores = utility_scores(model, pool.unlabeled, features, kernel, seed=seed, literal=literal)
    ranked = scores.ranking()
    if eligible is not None:
        allowed = set(eligible)
        ranked = np.array([i for i in ranked if i in allowed], dtype=np.int64)
    chosen = [int(i) for i in ranked[:B]]
    pool.move_to_candidates(chosen)
    return chosen


# --- second stage: cost-based selection ------------------------------------


class CostModel:
    """Per-instance labeling costs, indexed like the feature matrix."""

    def __init__(self, costs):
        c = np.array(costs, dtype=float).ravel()
        if np.any(np.isnan(c)) or np.any(c < 0):
            raise StrategyError("labeling costs must be nonnegative")
        c.setflags(write=False)
        self.costs = c

    @classmethod
    def uniform(cls, n: int, value: float = 1.0) -> CostModel:
        return cls(np.full(n, float(value)))

    @classmethod
    def parse(cls, text: str, n: int, row_ids=None) -> CostModel:
        """``uniform:<c>`` or the path of a file with one cost per dataset row.

        ``row_ids`` maps each local row to its line in the cost file.
        """
        if text.startswith("uniform:"):
            return cls.uniform(n, float(text.split(":", 1)[1]))
        values = [float(v) for v in Path(text).read_text().split()]
        rows = np.arange(n) if row_ids is None else np.asarray(row_ids)
        if rows.max(initial=-1) >= len(values):
            raise StrategyError(f"{text}: has {len(values)} costs, need at least {rows.max() + 1}")
        return cls(np.asarray(values)[rows])

    def __call__(self, idx) -> float:
        return float(self.costs[idx])

    def __len__(self):
        return len(self.costs)


def expected_pool_risk(model: FittedEstimator, eval_pool: Sequence[int], features, L: LossMatrix) -> float:
    """Mean Bayes risk ``min_y sum_j P(j|x) L(y, j)`` over ``eval_pool``."""
    idx = list(eval_pool)
    if not idx:
        return 0.0
    P = model.predict_proba(np.asarray(features)[idx])
    return float(L.expected_losses(P).min(axis=1).mean())


def cost_score(xi: int, spec: EstimatorSpec, labeled_X, labeled_y, eval_pool, features,
               L: LossMatrix, cost: CostModel, current_model: FittedEstimator) -> float:
    """Labeling cost of ``xi`` plus the expected Bayes risk after adding it.

    The risk term averages, over the current model's posterior for ``xi``, the
    pool risk of the model refit with ``xi`` assigned each possible class.
    ``xi`` itself is removed from ``eval_pool``.
    """
    c = cost(xi)
    if np.isinf(c):
        return float("inf")
    X = np.asarray(features)
    K = current_model.K
    p_xi = current_model.predict_proba(X[xi])
    pool = [i for i in eval_pool if i != xi]
    base = current_model if isinstance(current_model, GaussianNBModel) else None
    risk = 0.0
    for k in range(K):
        if p_xi[k] == 0:
            continue
        model_k = refit_with(spec, labeled_X, labeled_y, K, X[xi], k, base_model=base)
        risk += p_xi[k] * expected_pool_risk(model_k, pool, X, L)
    return c + risk


def select_from_candidates(candidates: Sequence[int], b: int, spec: EstimatorSpec, labeled_X, labeled_y,
                           eval_pool, features, L: LossMatrix, cost: CostModel,
                           current_model: FittedEstimator, n_jobs: int = 1, return_scores: bool = False):
    """Rank ``candidates`` by ascending ``cost_score`` and return the first ``b``.

    Scores are computed against the round-start model; ties go to the smaller
    index. ``n_jobs > 1`` scores candidates on a thread pool, which does not
    change the result.
    """
    candidates = [int(i) for i in candidates]
    if not candidates:
        raise StrategyError("empty candidate set")
    if not 1 <= b <= len(candidates):
        raise StrategyError(f"batch size {b} outside 1..{len(candidates)}")

    def score(xi):
        return cost_score(xi, spec, labeled_X, labeled_y, eval_pool, features, L, cost, current_model)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            scores = list(ex.map(score, candidates))
    else:
        scores = [score(xi) for xi in candidates]
    order = np.lexsort((candidates, scores))
    ranked = [candidates[j] for j in order]
    if return_scores:
        return ranked[:b], dict(zip(candidates, scores))
    return ranked[:b]


# --- baselines ---------------------------------------------------------------


def vote_entropy(member_proba) -> np.ndarray:
    """Entropy of the committee's hard-vote distribution, per instance."""
    M, n, K = member_proba.shape
    votes = member_proba.argmax(axis=2)
    freq = np.stack([(votes == k).mean(axis=0) for k in range(K)], axis=1)
    return shannon_entropy(freq.T) if n else np.zeros(0)


def kcenter_greedy(labeled: Sequence[int], unlabeled: Sequence[int], features, count: int) -> list[int]:
    """Farthest-point traversal from the labeled set (ties to the smaller index)."""
    X = np.asarray(features)
    U = np.asarray(sorted(unlabeled), dtype=np.int64)
    if len(labeled):
        min_dist = cdist(X[U], X[list(labeled)]).min(axis=1)
    else:
        min_dist = np.full(len(U), np.inf)
    picked = []
    alive = np.ones(len(U), dtype=bool)
    for _ in range(min(count, len(U))):
        masked = np.where(alive, min_dist, -np.inf)
        j = int(np.argmax(masked))  # argmax returns the first maximum
        picked.append(int(U[j]))
        alive[j] = False
        min_dist = np.minimum(min_dist, cdist(X[U], X[U[j]][None, :])[:, 0])
    return picked


def baseline_rank(kind: str, model: FittedEstimator, labeled, unlabeled, features, seed: int = 0,
                  count: int | None = None) -> list[int]:
    """Unlabeled indices ordered by a baseline strategy's preference."""
    U = np.asarray(sorted(unlabeled), dtype=np.int64)
    count = len(U) if count is None else min(count, len(U))
    X = np.asarray(features)
    if kind == "random":
        return [int(i) for i in np.random.default_rng(seed).permutation(U)[:count]]
    if kind == "kcenter_greedy":
        return kcenter_greedy(labeled, U, X, count)
    if kind == "ensemble_disagreement":
        if not isinstance(model, EnsembleModel):
            raise StrategyError("ensemble_disagreement needs a bootstrap_ensemble model")
        scores = vote_entropy(model.member_proba(X[U]))
    elif kind == "entropy":
        scores = shannon_entropy(model.predict_proba(X[U]).T)
    elif kind == "margin":
        scores = uncertainty(model.predict_proba(X[U]))
    else:
        raise StrategyError(f"unknown baseline {kind!r}; expected one of {BASELINE_KINDS}")
    return [int(i) for i in U[_top(scores, U, count)]]


def baseline_select(kind: str, model: FittedEstimator, pool, features, b: int, seed: int = 0) -> list[int]:
    if b > len(pool.unlabeled):
        raise StrategyError("batch size exceeds the unlabeled pool")
    return baseline_rank(kind, model, pool.labeled, pool.unlabeled, features, seed=seed, count=b)
