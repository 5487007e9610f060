"""Seeded benchmark runs, aggregation and plot-data export."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .loop import InteractiveOracle, LearningCurve, RunConfig, run_experiment

log = logging.getLogger(__name__)


def dataset_name(path: str) -> str:
    return Path(path).stem


def run_configs(config: ExperimentConfig):
    """One RunConfig per (dataset, strategy, seed), in config order."""
    for path in config.datasets:
        for strategy in config.strategies:
            for seed in config.seeds:
                yield RunConfig(
                    dataset=path, strategy=strategy, seed=seed, label_column=config.label_column,
                    estimator=config.estimator, budget=config.budget, batch_size=config.batch_size,
                    candidate_multiplier=config.candidate_multiplier, n_initial=config.n_initial,
                    train_fraction=config.train_fraction, loss=config.loss_matrix, cost=config.cost_model,
                    kernel=config.kernel, risk_subsample=config.risk_subsample,
                    literal_margin=config.literal_margin,
                )


def curve_path(out: Path, run: RunConfig) -> Path:
    return out / "runs" / dataset_name(run.dataset) / f"{run.strategy}_seed{run.seed}.csv"


def _interactive(prep):
    return InteractiveOracle(prep.raw_train.features, prep.train.K)


def _execute(job):
    run, path, interactive = job
    try:
        curve = run_experiment(run, oracle=_interactive if interactive else None)
    except Exception as exc:  # reported per run; the bench continues
        log.exception("run failed: %s %s seed=%s", run.dataset, run.strategy, run.seed)
        return run, None, f"{type(exc).__name__}: {exc}"
    path.parent.mkdir(parents=True, exist_ok=True)
    curve.to_csv(path)
    return run, curve, None


@dataclass
class AggregateReport:
    config_hash: str
    datasets: list[str]
    strategies: list[str]
    seeds: list[int]
    cells: list[dict] = field(default_factory=list)
    summary: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    started: str = ""
    finished: str = ""

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "AggregateReport":
        return cls(**json.loads(text))

    def series(self, dataset: str, strategy: str):
        rows = sorted((c for c in self.cells if c["dataset"] == dataset and c["strategy"] == strategy),
                      key=lambda c: c["round"])
        return [c["round"] for c in rows], [c["mean_accuracy"] for c in rows], [c["std_accuracy"] for c in rows]


def learning_curve_area(acc) -> float:
    """Trapezoidal area under accuracy-vs-round, divided by the number of rounds."""
    acc = np.asarray(acc, dtype=float)
    if len(acc) < 2:
        return float(acc[0]) if len(acc) else 0.0
    return float(np.trapezoid(acc) / (len(acc) - 1))


def aggregate(curves: dict[tuple[str, str, int], list[float]], datasets, strategies, seeds) -> tuple[list, list]:
    """Per-round mean/std over seeds.

    Curves that stopped early (cost budgets) are padded with their last value
    so every cell averages the same seeds.
    """
    cells, summary = [], []
    for ds in datasets:
        for strategy in strategies:
            runs = [curves[ds, strategy, s] for s in seeds if (ds, strategy, s) in curves]
            if not runs:
                continue
            n = max(len(r) for r in runs)
            A = np.array([list(r) + [r[-1]] * (n - len(r)) for r in runs])
            for r in range(n):
                cells.append({
                    "dataset": ds, "strategy": strategy, "round": r, "n_seeds": len(runs),
                    "mean_accuracy": float(A[:, r].mean()), "std_accuracy": float(A[:, r].std()),
                })
            summary.append({
                "dataset": ds, "strategy": strategy, "n_seeds": len(runs),
                "final_accuracy": float(A[:, -1].mean()),
                "auc": float(np.mean([learning_curve_area(a) for a in A])),
            })
    return cells, summary


def run_bench(config: ExperimentConfig) -> AggregateReport:
    """Run every (dataset, strategy, seed) combination and write the results.

    Layout under ``output_dir``: ``runs/<dataset>/<strategy>_seed<k>.csv``,
    ``aggregate.json`` and ``plots/<dataset>.dat``.
    """
    out = Path(config.output_dir)
    started = datetime.now(timezone.utc).isoformat()
    interactive = config.oracle == "interactive"
    jobs = [(run, curve_path(out, run), interactive) for run in run_configs(config)]
    if config.workers > 1 and not interactive:
        with ProcessPoolExecutor(config.workers) as ex:
            results = list(ex.map(_execute, jobs))
    else:
        results = [_execute(job) for job in jobs]

    curves, failures = {}, []
    for run, curve, error in results:
        key = (dataset_name(run.dataset), run.strategy, run.seed)
        if error is not None:
            failures.append({"dataset": key[0], "strategy": key[1], "seed": key[2], "error": error})
        else:
            curves[key] = [r.test_accuracy for r in curve.records]
            if not curve.complete:
                failures.append({"dataset": key[0], "strategy": key[1], "seed": key[2],
                                 "error": "incomplete: oracle aborted"})

    names = [dataset_name(p) for p in config.datasets]
    cells, summary = aggregate(curves, names, config.strategies, config.seeds)
    report = AggregateReport(config.hash(), names, list(config.strategies), list(config.seeds),
                             cells, summary, failures, started, datetime.now(timezone.utc).isoformat())
    out.mkdir(parents=True, exist_ok=True)
    (out / "aggregate.json").write_text(report.to_json())
    if cells:
        emit_plotdata(report, out / "plots")
    return report


def emit_plotdata(report: AggregateReport, out_dir) -> list[Path]:
    """One whitespace-delimited table per dataset: round, then mean/std per strategy."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for ds in report.datasets:
        columns, rounds = [], None
        header = ["round"]
        for strategy in report.strategies:
            r, mean, std = report.series(ds, strategy)
            if not r:
                continue
            rounds = r if rounds is None or len(r) > len(rounds) else rounds
            columns.append((mean, std))
            header += [f"{strategy}_mean", f"{strategy}_std"]
        if rounds is None:
            continue
        lines = [" ".join(header)]
        for i, r in enumerate(rounds):
            row = [str(r)]
            for mean, std in columns:
                row += [repr(mean[i]), repr(std[i])] if i < len(mean) else ["nan", "nan"]
            lines.append(" ".join(row))
        path = out_dir / f"{ds}.dat"
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    return written


def read_plotdata(path) -> dict[str, list[float]]:
    lines = Path(path).read_text().split("\n")
    header = lines[0].split()
    rows = [[float(v) for v in line.split()] for line in lines[1:] if line.strip()]
    return {name: [row[j] for row in rows] for j, name in enumerate(header)}
