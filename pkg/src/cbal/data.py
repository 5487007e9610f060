"""Dataset ingestion, standardization, splitting and pool bookkeeping."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed dataset files or invalid split/pool parameters."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    K: int
    feature_names: tuple[str, ...] | None = None
    class_names: tuple[str, ...] | None = None
    # position of each row in the file it was loaded from
    row_ids: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise DataError("features must be a 2-d matrix")
        if y.ndim != 1 or len(y) != X.shape[0]:
            raise DataError("labels length must equal the number of feature rows")
        if self.K < 2:
            raise DataError("single-class dataset")
        if len(y) and (y.min() < 0 or y.max() >= self.K):
            raise DataError(f"labels must lie in 0..{self.K - 1}")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain NaN or infinite values")
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise DataError("feature_names length must equal the number of columns")
        rows = np.arange(len(y)) if self.row_ids is None else np.asarray(self.row_ids, dtype=np.int64)
        X.setflags(write=False)
        y.setflags(write=False)
        rows.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "row_ids", rows)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            self.features[idx],
            self.labels[idx],
            self.K,
            self.feature_names,
            self.class_names,
            self.row_ids[idx],
        )

    def with_features(self, features) -> "Dataset":
        return Dataset(features, self.labels, self.K, self.feature_names, self.class_names, self.row_ids)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.K)


def load_csv(path, label_column: str | int = -1) -> Dataset:
    """Load a comma-separated file with a header row.

    Labels are mapped to ``0..K-1`` in order of first appearance; the original
    label strings are kept in ``class_names``. ``label_column`` is a header
    name or a zero-based column index (negative indices count from the end).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = [h.strip() for h in rows[0]], rows[1:]
    if not body:
        raise DataError(f"{path}: no data rows")

    ncol = len(header)
    if isinstance(label_column, str) and not _is_int(label_column):
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not in header")
        col = header.index(label_column)
    else:
        col = int(label_column)
        if not -ncol <= col < ncol:
            raise DataError(f"{path}: label column index {col} out of range")
        col %= ncol

    encoding: dict[str, int] = {}
    labels = []
    features = np.empty((len(body), ncol - 1))
    for r, row in enumerate(body, start=2):
        if len(row) != ncol:
            raise DataError(f"{path}:{r}: expected {ncol} columns, got {len(row)}")
        raw_label = row[col].strip()
        if raw_label == "":
            raise DataError(f"{path}:{r}: unparseable label (empty)")
        labels.append(encoding.setdefault(raw_label, len(encoding)))
        cells = row[:col] + row[col + 1:]
        for c, cell in enumerate(cells):
            try:
                value = float(cell)
            except ValueError:
                raise DataError(f"{path}:{r}: non-numeric feature cell {cell.strip()!r}") from None
            if not math.isfinite(value):
                raise DataError(f"{path}:{r}: missing or infinite feature value")
            features[r - 2, c] = value

    if len(encoding) < 2:
        raise DataError(f"{path}: single-class dataset")
    names = tuple(header[:col] + header[col + 1:])
    return Dataset(features, np.array(labels), len(encoding), names, tuple(encoding))


def _is_int(text: str) -> bool:
    try:
        int(text)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class StandardizationTransform:
    mean: np.ndarray
    scale: np.ndarray

    def apply(self, data: Dataset) -> Dataset:
        return data.with_features(self.transform(data.features))

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != len(self.mean):
            raise DataError(f"expected {len(self.mean)} features, got {X.shape[-1]}")
        return (X - self.mean) / self.scale


def fit_standardizer(train: Dataset) -> StandardizationTransform:
    """Per-feature mean and population standard deviation; constant columns get scale 1."""
    if train.n == 0:
        raise DataError("cannot fit a standardizer on an empty dataset")
    mean = train.features.mean(axis=0)
    sd = train.features.std(axis=0)
    sd[sd == 0] = 1.0
    return StandardizationTransform(mean, sd)


def apply_standardizer(t: StandardizationTransform, data: Dataset) -> Dataset:
    return t.apply(data)


@dataclass(frozen=True)
class SplitResult:
    train: Dataset
    test: Dataset
    train_idx: np.ndarray
    test_idx: np.ndarray
    stratified: bool

    def __iter__(self):
        # allows ``train, test = split(...)``
        return iter((self.train, self.test))


def split(d: Dataset, train_fraction: float = 0.8, seed: int = 0) -> SplitResult:
    """Stratified train/test split.

    Each class contributes ``round(count * train_fraction)`` rows to the train
    side, clipped so that both sides of a class with at least two rows stay
    nonempty. If some class has fewer than two rows the split is done without
    stratification and ``stratified`` is False.
    """
    if not 0 < train_fraction < 1:
        raise DataError("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    counts = d.class_counts()
    stratified = bool(np.all(counts[counts > 0] >= 2))
    if stratified:
        train_parts, test_parts = [], []
        for k in range(d.K):
            members = np.flatnonzero(d.labels == k)
            if len(members) == 0:
                continue
            members = rng.permutation(members)
            n_train = min(max(int(round(len(members) * train_fraction)), 1), len(members) - 1)
            train_parts.append(members[:n_train])
            test_parts.append(members[n_train:])
        train_idx = np.sort(np.concatenate(train_parts))
        test_idx = np.sort(np.concatenate(test_parts))
    else:
        perm = rng.permutation(d.n)
        n_train = int(round(d.n * train_fraction))
        train_idx, test_idx = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    if len(train_idx) == 0 or len(test_idx) == 0:
        raise DataError("split leaves an empty side")
    return SplitResult(d.subset(train_idx), d.subset(test_idx), train_idx, test_idx, stratified)


@dataclass(frozen=True)
class Budget:
    """Labeling budget: a cap on |labeled| ("count") or on total cost spent ("cost")."""

    amount: float
    mode: str = "count"

    def __post_init__(self):
        if self.mode not in ("count", "cost"):
            raise DataError(f"unknown budget mode {self.mode!r}")
        if not self.amount > 0:
            raise DataError("budget must be positive")


@dataclass
class PoolState:
    """Disjoint labeled / unlabeled / candidate index sets over a training set.

    ``labels`` holds only labels handed out by an oracle and ``provenance``
    records where each one came from.
    """

    labeled: list[int]
    unlabeled: list[int]
    candidates: list[int]
    budget: Budget
    cost_spent: float = 0.0
    labels: dict[int, int] = field(default_factory=dict)
    provenance: dict[int, str] = field(default_factory=dict)
    universe: frozenset = frozenset()

    def __post_init__(self):
        if not self.universe:
            self.universe = frozenset(self.labeled) | frozenset(self.unlabeled) | frozenset(self.candidates)

    def check(self) -> None:
        """Assert partition conservation and budget safety."""
        L, U, H = set(self.labeled), set(self.unlabeled), set(self.candidates)
        sizes = len(self.labeled) + len(self.unlabeled) + len(self.candidates)
        if len(L) + len(U) + len(H) != sizes:
            raise AssertionError("duplicate index inside a pool")
        if L & U or L & H or U & H:
            raise AssertionError("pools are not disjoint")
        if L | U | H != self.universe:
            raise AssertionError("pool union differs from the initial universe")
        if set(self.labels) != L:
            raise AssertionError("labeled set and oracle labels disagree")
        if self.budget.mode == "cost" and self.cost_spent > self.budget.amount + 1e-9:
            raise AssertionError("cost budget exceeded")
        if self.budget.mode == "count" and len(self.labeled) > self.budget.amount:
            raise AssertionError("count budget exceeded")

    def remaining(self) -> float:
        if self.budget.mode == "count":
            return self.budget.amount - len(self.labeled)
        return self.budget.amount - self.cost_spent

    def add_label(self, idx: int, label: int, cost: float, source: str) -> None:
        if idx in self.labels:
            raise ValueError(f"index {idx} already labeled")
        self.unlabeled = [i for i in self.unlabeled if i != idx]
        self.candidates = [i for i in self.candidates if i != idx]
        self.labeled.append(idx)
        self.labels[idx] = int(label)
        self.provenance[idx] = source
        self.cost_spent += cost

    def move_to_candidates(self, idx: Sequence[int]) -> None:
        chosen = set(idx)
        self.unlabeled = [i for i in self.unlabeled if i not in chosen]
        self.candidates.extend(idx)

    def release_candidates(self) -> None:
        self.unlabeled = sorted(self.unlabeled + self.candidates)
        self.candidates = []

    def labeled_arrays(self):
        idx = np.array(self.labeled, dtype=np.int64)
        return idx, np.array([self.labels[i] for i in self.labeled], dtype=np.int64)


def init_pools(train: Dataset, n_initial: int, budget: Budget, seed: int = 0) -> PoolState:
    """Stratified random initial labeled set of ``n_initial`` rows.

    Every class gets at least one row; the remainder is allocated in proportion
    to class frequency (largest remainders first). The initial labels are
    taken from ``train`` and recorded with provenance ``"initial"``.
    """
    if not isinstance(budget, Budget):
        budget = Budget(float(budget))
    counts = train.class_counts()
    present = np.flatnonzero(counts)
    if n_initial < len(present):
        raise DataError(f"n_initial={n_initial} cannot cover all {len(present)} classes")
    if n_initial >= train.n:
        raise DataError("n_initial must be smaller than the training set")

    alloc = np.zeros(train.K, dtype=np.int64)
    alloc[present] = 1
    spare = n_initial - len(present)
    if spare:
        share = (counts - 1).clip(min=0) * spare / (counts[present] - 1).sum()
        extra = np.minimum(np.floor(share).astype(np.int64), (counts - 1).clip(min=0))
        left = spare - extra.sum()
        order = sorted(present, key=lambda k: (-(share[k] - extra[k]), k))
        for k in order:
            if left == 0:
                break
            if alloc[k] + extra[k] < counts[k]:
                extra[k] += 1
                left -= 1
        alloc += extra

    rng = np.random.default_rng(seed)
    labeled = []
    for k in range(train.K):
        if alloc[k]:
            members = np.flatnonzero(train.labels == k)
            labeled.extend(rng.choice(members, size=alloc[k], replace=False).tolist())
    labeled = sorted(int(i) for i in labeled)
    chosen = set(labeled)
    state = PoolState(
        labeled=[],
        unlabeled=[i for i in range(train.n) if i not in chosen],
        candidates=[],
        budget=budget,
        universe=frozenset(range(train.n)),
    )
    for i in labeled:
        state.labeled.append(i)
        state.labels[i] = int(train.labels[i])
        state.provenance[i] = "initial"
    return state
