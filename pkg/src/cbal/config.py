"""Flat ``key = value`` experiment configuration."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .data import Budget
from .estimators import KINDS, EstimatorSpec
from .strategy import STRATEGIES, KernelSpec

OUTPUT_ENV = "CBAL_OUTPUT_DIR"

# key -> (default, description); documents every accepted key
KEYS = {
    "dataset": (None, "comma-separated CSV paths (header row required)"),
    "label_column": ("-1", "label column name or zero-based index"),
    "estimator": ("gaussian_nb", "one of " + ", ".join(KINDS)),
    "learning_rate": ("0.1", "softmax step size"),
    "l2": ("0.001", "softmax L2 strength"),
    "max_epochs": ("200", "softmax epoch cap"),
    "tol": ("1e-6", "softmax convergence tolerance on the loss change"),
    "var_floor": ("1e-6", "gaussian_nb variance floor"),
    "ensemble_size": ("10", "bootstrap_ensemble member count"),
    "ensemble_base": ("gaussian_nb", "bootstrap_ensemble member kind"),
    "strategies": ("cbal,random", "comma-separated: " + ", ".join(STRATEGIES)),
    "budget_mode": ("count", "count (total labeled) or cost (total labeling cost)"),
    "budget": ("110", "label count m or cost budget"),
    "batch_size": ("10", "labels queried per round"),
    "candidate_multiplier": ("5", "candidate set size as a multiple of batch_size"),
    "n_initial": ("10", "initial labeled rows"),
    "train_fraction": ("0.8", "train share of the stratified split"),
    "loss_matrix": ("zero-one", "'zero-one' or a path to a K-line CSV matrix"),
    "cost_model": ("uniform:1", "'uniform:<c>' or a path with one cost per dataset row"),
    "seeds": ("0", "comma-separated seeds; 'a-b' ranges allowed"),
    "bandwidth": ("median", "RBF bandwidth: positive number or 'median'"),
    "risk_subsample": ("300", "max unlabeled rows used to score expected risk"),
    "uncertainty": ("flipped", "flipped (1 - margin) or literal (raw margin)"),
    "oracle": ("ground_truth", "ground_truth or interactive"),
    "output_dir": ("results", "where curve and aggregate files go"),
    "workers": ("1", "parallel runs"),
}
PATH_KEYS = ("dataset", "loss_matrix", "cost_model")
# keys that cannot change results
UNHASHED = ("output_dir", "workers")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}", "expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
        if key in values:
            raise ConfigError(key, "duplicate key")
        values[key] = value
    return values


def _resolve_paths(values: dict[str, str], base: Path) -> dict[str, str]:
    out = dict(values)
    for key in PATH_KEYS:
        if key not in out:
            continue
        parts = []
        for item in out[key].split(","):
            item = item.strip()
            if key == "loss_matrix" and item == "zero-one" or key == "cost_model" and item.startswith("uniform:"):
                parts.append(item)
            elif item:
                p = Path(item)
                parts.append(str(p if p.is_absolute() else (base / p).resolve()))
        out[key] = ",".join(parts)
    return out


def load(path=None, overrides: dict[str, str] | None = None, env=None) -> "ExperimentConfig":
    """Read a config file, then apply the output env override, then ``overrides``.

    Relative paths in the file are taken relative to the file; relative
    override paths are taken relative to the working directory.
    """
    env = os.environ if env is None else env
    values = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError("config", f"missing file {path}")
        values = _resolve_paths(parse_text(path.read_text(), str(path)), path.parent)
    if env.get(OUTPUT_ENV):
        values["output_dir"] = env[OUTPUT_ENV]
    for key, value in (overrides or {}).items():
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
        values.update(_resolve_paths({key: value}, Path.cwd()))
    return ExperimentConfig.from_values(values)


def _seeds(text: str) -> tuple[int, ...]:
    seeds = []
    for item in text.split(","):
        item = item.strip()
        if "-" in item:
            lo, hi = item.split("-", 1)
            if int(hi) < int(lo):
                raise ValueError(f"empty range {item}")
            seeds.extend(range(int(lo), int(hi) + 1))
        elif item:
            seeds.append(int(item))
    return tuple(seeds)


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple[str, ...]
    label_column: str | int
    estimator: EstimatorSpec
    strategies: tuple[str, ...]
    budget: Budget
    batch_size: int
    candidate_multiplier: int
    n_initial: int
    train_fraction: float
    loss_matrix: str
    cost_model: str
    seeds: tuple[int, ...]
    kernel: KernelSpec
    risk_subsample: int
    literal_margin: bool
    oracle: str
    output_dir: str
    workers: int
    values: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_values(cls, raw: dict[str, str]) -> "ExperimentConfig":
        v = {k: d for k, (d, _) in KEYS.items()}
        v.update(raw)

        def conv(key, fn):
            try:
                return fn(v[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(key, f"invalid value {v[key]!r} ({exc})") from None

        if not v["dataset"]:
            raise ConfigError("dataset", "required")
        datasets = tuple(p.strip() for p in v["dataset"].split(",") if p.strip())
        for p in datasets:
            if not Path(p).is_file():
                raise ConfigError("dataset", f"missing file {p}")
        if len({Path(p).stem for p in datasets}) != len(datasets):
            raise ConfigError("dataset", "dataset file names must be distinct")
        strategies = tuple(s.strip() for s in v["strategies"].split(",") if s.strip())
        if not strategies:
            raise ConfigError("strategies", "at least one strategy required")
        for s in strategies:
            if s not in STRATEGIES:
                raise ConfigError("strategies", f"unknown strategy {s!r}; choose from {', '.join(STRATEGIES)}")
        if len(set(strategies)) != len(strategies):
            raise ConfigError("strategies", "duplicate strategy")
        seeds = conv("seeds", _seeds)
        if not seeds:
            raise ConfigError("seeds", "at least one seed required")
        if min(seeds) < 0:
            raise ConfigError("seeds", "seeds must be nonnegative")
        if len(set(seeds)) != len(seeds):
            raise ConfigError("seeds", "duplicate seed")
        label = v["label_column"]
        label_column = int(label) if label.lstrip("-").isdigit() else label

        hyper = dict(learning_rate=conv("learning_rate", float), l2=conv("l2", float),
                     max_epochs=conv("max_epochs", int), tol=conv("tol", float),
                     var_floor=conv("var_floor", float))
        size = conv("ensemble_size", int)
        for key, value in hyper.items():
            if not value > 0:
                raise ConfigError(key, "must be strictly positive")
        if size < 2:
            raise ConfigError("ensemble_size", "must be at least 2")
        try:
            base = EstimatorSpec(v["ensemble_base"], **hyper)
        except ValueError as exc:
            raise ConfigError("ensemble_base", str(exc)) from None
        try:
            estimator = EstimatorSpec(v["estimator"], ensemble_size=size,
                                      base=base if v["estimator"] == "bootstrap_ensemble" else None, **hyper)
        except ValueError as exc:
            raise ConfigError("estimator", str(exc)) from None

        batch_size = conv("batch_size", int)
        if batch_size < 1:
            raise ConfigError("batch_size", "must be >= 1")
        multiplier = conv("candidate_multiplier", int)
        if multiplier < 1:
            raise ConfigError("candidate_multiplier", "must be >= 1")
        n_initial = conv("n_initial", int)
        if n_initial < 2:
            raise ConfigError("n_initial", "must be >= 2")
        fraction = conv("train_fraction", float)
        if not 0 < fraction < 1:
            raise ConfigError("train_fraction", "must lie in (0, 1)")
        mode = v["budget_mode"]
        if mode not in ("count", "cost"):
            raise ConfigError("budget_mode", "must be 'count' or 'cost'")
        amount = conv("budget", float)
        if not amount > 0:
            raise ConfigError("budget", "must be positive")
        if mode == "count":
            if amount != int(amount):
                raise ConfigError("budget", "count budget must be an integer")
            if amount <= n_initial:
                raise ConfigError("budget", f"count budget must exceed n_initial={n_initial}")
        try:
            kernel = KernelSpec(v["bandwidth"])
        except ValueError as exc:
            raise ConfigError("bandwidth", str(exc)) from None
        subsample = conv("risk_subsample", int)
        if subsample < 1:
            raise ConfigError("risk_subsample", "must be >= 1")
        if v["uncertainty"] not in ("flipped", "literal"):
            raise ConfigError("uncertainty", "must be 'flipped' or 'literal'")
        if v["oracle"] not in ("ground_truth", "interactive"):
            raise ConfigError("oracle", "must be 'ground_truth' or 'interactive'")
        if not (v["cost_model"].startswith("uniform:") or Path(v["cost_model"]).is_file()):
            raise ConfigError("cost_model", f"missing file {v['cost_model']}")
        if v["cost_model"].startswith("uniform:"):
            conv("cost_model", lambda s: float(s.split(":", 1)[1]))
        if v["loss_matrix"] != "zero-one" and not Path(v["loss_matrix"]).is_file():
            raise ConfigError("loss_matrix", f"missing file {v['loss_matrix']}")
        workers = conv("workers", int)
        if workers < 1:
            raise ConfigError("workers", "must be >= 1")

        return cls(
            datasets=datasets, label_column=label_column, estimator=estimator, strategies=strategies,
            budget=Budget(amount, mode), batch_size=batch_size, candidate_multiplier=multiplier,
            n_initial=n_initial, train_fraction=fraction, loss_matrix=v["loss_matrix"],
            cost_model=v["cost_model"], seeds=seeds, kernel=kernel, risk_subsample=subsample,
            literal_margin=v["uncertainty"] == "literal", oracle=v["oracle"], output_dir=v["output_dir"],
            workers=workers, values=v,
        )

    def normalized(self) -> dict:
        """Parsed settings as plain data, independent of key order and spelling."""
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k not in ("values",) + UNHASHED}
        d["estimator"] = asdict(self.estimator)
        d["budget"] = asdict(self.budget)
        d["kernel"] = asdict(self.kernel)
        return json.loads(json.dumps(d, default=list))

    def hash(self) -> str:
        blob = json.dumps(self.normalized(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]
