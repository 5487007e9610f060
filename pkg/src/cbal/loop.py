"""Budgeted active-learning rounds and learning-curve recording."""

from __future__ import annotations

import csv
import logging
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, TextIO

import numpy as np

from .data import Budget, Dataset, PoolState, fit_standardizer, init_pools, load_csv, split
from .estimators import EnsembleModel, EstimatorSpec, FittedEstimator, LossMatrix, bayes_decision, fit
from .strategy import (
    STRATEGIES,
    CostModel,
    KernelSpec,
    StrategyError,
    baseline_rank,
    select_candidates,
    select_from_candidates,
)

log = logging.getLogger(__name__)

CURVE_HEADER = ("round", "n_labeled", "cost_spent", "test_accuracy", "strategy", "seed")


class OracleAborted(RuntimeError):
    """The label source stopped answering (e.g. end of input)."""


class GroundTruthOracle:
    def __init__(self, labels):
        self._labels = np.asarray(labels, dtype=np.int64)

    def label(self, idx: int) -> int:
        return int(self._labels[idx])


class InteractiveOracle:
    """Ask for labels on a text stream.

    Writes ``LABEL? idx=<i> features=<v1,...,vd> classes=0..K-1`` and reads one
    integer line back. Invalid answers are asked again; end of input aborts.
    """

    def __init__(self, features, K: int, stdin: TextIO | None = None, stdout: TextIO | None = None):
        self.features = np.asarray(features)
        self.K = K
        self.stdin = stdin if stdin is not None else sys.stdin
        self.stdout = stdout if stdout is not None else sys.stdout

    def label(self, idx: int) -> int:
        values = ",".join(repr(float(v)) for v in self.features[idx])
        while True:
            self.stdout.write(f"LABEL? idx={idx} features={values} classes=0..{self.K - 1}\n")
            self.stdout.flush()
            line = self.stdin.readline()
            if not line:
                raise OracleAborted(f"no label received for instance {idx}")
            try:
                answer = int(line.strip())
            except ValueError:
                continue
            if 0 <= answer < self.K:
                return answer


@dataclass(frozen=True)
class RoundRecord:
    round: int
    n_labeled: int
    cost_spent: float
    test_accuracy: float
    test_risk: float
    wall_time: float
    strategy: str
    seed: int


@dataclass
class LearningCurve:
    strategy: str
    seed: int
    records: list[RoundRecord] = field(default_factory=list)
    queries: list[list[int]] = field(default_factory=list)
    complete: bool = True

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([r.test_accuracy for r in self.records])

    @property
    def n_labeled(self) -> list[int]:
        return [r.n_labeled for r in self.records]

    def query_order(self) -> list[int]:
        return [i for batch in self.queries for i in batch]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CURVE_HEADER)
            for r in self.records:
                w.writerow([r.round, r.n_labeled, repr(r.cost_spent), repr(r.test_accuracy), r.strategy, r.seed])

    @staticmethod
    def read_csv(path) -> list[dict]:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))


@dataclass(frozen=True)
class RunConfig:
    """Everything one (dataset, strategy, seed) experiment needs."""

    dataset: Dataset | str
    strategy: str = "cbal"
    seed: int = 0
    label_column: str | int = -1
    estimator: EstimatorSpec = EstimatorSpec()
    budget: Budget = Budget(110)
    batch_size: int = 10
    candidate_multiplier: int = 5
    n_initial: int = 10
    train_fraction: float = 0.8
    loss: LossMatrix | str = "zero-one"
    cost: CostModel | str = "uniform:1"
    kernel: KernelSpec = KernelSpec()
    risk_subsample: int = 300
    literal_margin: bool = False
    n_jobs: int = 1

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise StrategyError(f"unknown strategy {self.strategy!r}; expected one of {sorted(STRATEGIES)}")
        if self.batch_size < 1 or self.candidate_multiplier < 1 or self.risk_subsample < 1:
            raise ValueError("batch_size, candidate_multiplier and risk_subsample must be >= 1")


@dataclass
class RoundContext:
    """Per-experiment constants shared by every round."""

    features: np.ndarray
    K: int
    spec: EstimatorSpec
    strategy: str
    batch_size: int
    candidate_multiplier: int
    kernel: KernelSpec
    loss: LossMatrix
    cost: CostModel
    seed: int
    risk_subsample: int = 300
    literal_margin: bool = False
    n_jobs: int = 1

    def round_seed(self, round_index: int) -> int:
        return int(np.random.SeedSequence([self.seed, round_index]).generate_state(1)[0])


def _eligible(state: PoolState, cost: CostModel) -> list[int]:
    if state.budget.mode == "count":
        return list(state.unlabeled)
    return [i for i in state.unlabeled if state.cost_spent + cost(i) <= state.budget.amount]


def budget_exhausted(state: PoolState, cost: CostModel) -> bool:
    if not state.unlabeled:
        return True
    if state.budget.mode == "count":
        return len(state.labeled) >= state.budget.amount
    return not _eligible(state, cost)


def _ranking(state: PoolState, ctx: RoundContext, model: FittedEstimator, eligible, take, seed) -> list[int]:
    kind = STRATEGIES[ctx.strategy]
    X = ctx.features
    if kind == "cbal":
        B = min(ctx.candidate_multiplier * ctx.batch_size, len(eligible))
        select_candidates(model, state, X, ctx.kernel, B, seed=seed, eligible=eligible,
                          literal=ctx.literal_margin)
        eval_pool = sorted(state.unlabeled + state.candidates)
        if len(eval_pool) > ctx.risk_subsample:
            rng = np.random.default_rng(seed)
            eval_pool = sorted(rng.choice(eval_pool, size=ctx.risk_subsample, replace=False).tolist())
        L_idx, L_y = state.labeled_arrays()
        return select_from_candidates(
            state.candidates, len(state.candidates), ctx.spec, X[L_idx], L_y, eval_pool, X,
            ctx.loss, ctx.cost, model, n_jobs=ctx.n_jobs)
    if kind == "ensemble_disagreement" and not isinstance(model, EnsembleModel):
        # committee used only to rank queries; the evaluated model is unchanged
        L_idx, L_y = state.labeled_arrays()
        committee_spec = EstimatorSpec("bootstrap_ensemble", base=ctx.spec, seed=seed)
        model = fit(committee_spec, X[L_idx], L_y, ctx.K)
    allowed = set(eligible)
    ranked = baseline_rank(kind, model, state.labeled, state.unlabeled, X, seed=seed)
    return [i for i in ranked if i in allowed]


def run_round(state: PoolState, ctx: RoundContext, model: FittedEstimator, oracle,
              round_index: int = 1) -> tuple[PoolState, FittedEstimator, list[int]]:
    """One round: rank, query up to a batch within budget, label, refit.

    Returns the mutated state, the refit model and the queried indices in
    query order.
    """
    if not state.unlabeled:
        raise StrategyError("empty unlabeled pool")
    eligible = _eligible(state, ctx.cost)
    take = min(ctx.batch_size, len(eligible))
    if state.budget.mode == "count":
        take = min(take, int(state.budget.amount) - len(state.labeled))
    if take <= 0:
        raise StrategyError("labeling budget exhausted")

    seed = ctx.round_seed(round_index)
    ranked = _ranking(state, ctx, model, eligible, take, seed)

    chosen, spent = [], state.cost_spent
    for i in ranked:
        c = ctx.cost(i)
        if state.budget.mode == "cost" and not spent + c <= state.budget.amount:
            continue
        chosen.append(i)
        spent = spent + c
        if len(chosen) == take:
            break

    queried = []
    try:
        for i in chosen:
            label = oracle.label(i)
            state.add_label(i, label, ctx.cost(i), "oracle")
            queried.append(i)
    finally:
        state.release_candidates()
    L_idx, L_y = state.labeled_arrays()
    model = fit(ctx.spec, ctx.features[L_idx], L_y, ctx.K)
    state.check()
    return state, model, queried


def evaluate(model: FittedEstimator, test: Dataset, L: LossMatrix | None = None) -> tuple[float, float]:
    """Accuracy of the 0-1 decision and mean realized loss of the ``L``-optimal decision."""
    if test.n == 0:
        raise ValueError("empty test set")
    P = model.predict_proba(test.features)
    accuracy = float(np.mean(bayes_decision(P, LossMatrix.zero_one(model.K)) == test.labels))
    L = L if L is not None else LossMatrix.zero_one(model.K)
    risk = float(np.mean(L.entries[bayes_decision(P, L), test.labels]))
    return accuracy, risk


@dataclass
class Prepared:
    train: Dataset
    test: Dataset
    raw_train: Dataset
    loss: LossMatrix
    cost: CostModel


def prepare(config: RunConfig) -> Prepared:
    data = config.dataset if isinstance(config.dataset, Dataset) else load_csv(config.dataset, config.label_column)
    parts = split(data, config.train_fraction, config.seed)
    if not parts.stratified:
        log.warning("a class has fewer than two rows; split is not stratified")
    transform = fit_standardizer(parts.train)
    if isinstance(config.loss, LossMatrix):
        loss = config.loss
    elif config.loss == "zero-one":
        loss = LossMatrix.zero_one(data.K)
    else:
        loss = LossMatrix.from_file(config.loss, data.K)
    if loss.K != data.K:
        raise ValueError(f"loss matrix K={loss.K} but the dataset has K={data.K}")
    if isinstance(config.cost, CostModel):
        cost = CostModel(config.cost.costs[parts.train.row_ids])
    else:
        cost = CostModel.parse(config.cost, parts.train.n, parts.train.row_ids)
    return Prepared(transform.apply(parts.train), transform.apply(parts.test), parts.train, loss, cost)


def run_experiment(config: RunConfig, oracle=None,
                   callback: Callable[[int, PoolState], None] | None = None) -> LearningCurve:
    """Split, standardize, seed the pools and run rounds until the budget is used.

    ``oracle`` defaults to the ground-truth labels of the training split.
    ``callback(round_index, state)`` is invoked after round 0 and every round.
    """
    prep = prepare(config)
    train, test = prep.train, prep.test
    if oracle is None:
        oracle = GroundTruthOracle(train.labels)
    elif callable(oracle) and not hasattr(oracle, "label"):
        oracle = oracle(prep)
    state = init_pools(train, config.n_initial, config.budget, config.seed)
    spec = config.estimator.with_seed(config.seed)
    ctx = RoundContext(
        features=train.features, K=train.K, spec=spec, strategy=config.strategy,
        batch_size=config.batch_size, candidate_multiplier=config.candidate_multiplier,
        kernel=config.kernel, loss=prep.loss, cost=prep.cost, seed=config.seed,
        risk_subsample=config.risk_subsample, literal_margin=config.literal_margin, n_jobs=config.n_jobs,
    )
    curve = LearningCurve(config.strategy, config.seed)
    start = time.perf_counter()

    L_idx, L_y = state.labeled_arrays()
    model = fit(spec, train.features[L_idx], L_y, train.K)

    def record(r):
        acc, risk = evaluate(model, test, prep.loss)
        curve.records.append(RoundRecord(r, len(state.labeled), state.cost_spent, acc, risk,
                                         time.perf_counter() - start, config.strategy, config.seed))
        if callback is not None:
            callback(r, state)

    record(0)
    r = 0
    while not budget_exhausted(state, prep.cost):
        r += 1
        try:
            state, model, queried = run_round(state, ctx, model, oracle, r)
        except OracleAborted as exc:
            log.warning("experiment aborted: %s", exc)
            curve.complete = False
            partial = [i for i in state.labeled if state.provenance[i] == "oracle"]
            done = sum(len(q) for q in curve.queries)
            if len(partial) > done:
                curve.queries.append(partial[done:])
                L_idx, L_y = state.labeled_arrays()
                model = fit(spec, train.features[L_idx], L_y, train.K)
                record(r)
            break
        curve.queries.append(queried)
        record(r)
    return curve


def with_strategy(config: RunConfig, strategy: str, seed: int | None = None) -> RunConfig:
    return replace(config, strategy=strategy, seed=config.seed if seed is None else seed)
