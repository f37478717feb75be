"""End-to-end experiment orchestration and machine-readable outputs.

A run is: seeded train/test split -> colony search over (C, sigma) with CV
fitness -> final models at the converged and best points -> held-out test
accuracy. Everything lands in report.json (canonical, byte-reproducible),
trails.csv and best_path.csv; wall-clock timings go to a separate
timing.json so report.json stays identical across reruns and worker counts.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .aco import AcoConfig, DigitLayout, OptimizationReport, optimize
from .crossval import CvResult, cross_validate, make_folds
from .data import Dataset, parse_csv, parse_libsvm, split_train_test
from .svm import MulticlassModel, TrainConfig, predict_batch, train_multiclass

SCHEMA_VERSION = 1

REPORT_FILE = "report.json"
TRAILS_FILE = "trails.csv"
BEST_PATH_FILE = "best_path.csv"
TIMING_FILE = "timing.json"


@dataclass(frozen=True)
class RunConfig:
    """Everything a tuning run needs; defaults mirror the headline setup
    (30 ants, 500 iterations, rho 0.7, Q 100, alpha = beta = 1)."""

    data_path: str
    data_format: str = "libsvm"  # or "csv"
    label_column: int = 0
    csv_header: bool = False
    train_count: int = 90
    cv_k: int = 5
    ants: int = 30
    iters: int = 500
    rho: float = 0.7
    q: float = 100.0
    alpha: float = 1.0
    beta: float = 1.0
    eta: float = 1.0
    tau0: float = 1.0
    epsilon_acc: float = 1e-3
    convergence_fraction: float = 0.9
    c_digits: int = 5
    c_high_power: int = 2
    sigma_digits: int = 5
    sigma_high_power: int = 0
    kkt_tolerance: float = 1e-3
    max_passes: int = 10
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.data_format not in ("libsvm", "csv"):
            raise ValueError(f"unknown data format {self.data_format!r}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        # constructing the embedded configs validates the numeric fields
        self.aco_config()
        self.digit_layout()
        self.train_config()

    def aco_config(self) -> AcoConfig:
        return AcoConfig(
            m=self.ants,
            n_max=self.iters,
            rho=self.rho,
            q=self.q,
            alpha=self.alpha,
            beta=self.beta,
            eta=self.eta,
            tau0=self.tau0,
            epsilon_acc=self.epsilon_acc,
            convergence_fraction=self.convergence_fraction,
            seed=self.seed,
        )

    def digit_layout(self) -> DigitLayout:
        return DigitLayout(
            c_digits=self.c_digits,
            c_high_power=self.c_high_power,
            sigma_digits=self.sigma_digits,
            sigma_high_power=self.sigma_high_power,
        )

    def train_config(self, c: float = 1.0, sigma: float = 1.0) -> TrainConfig:
        return TrainConfig(
            c=c, sigma=sigma, kkt_tolerance=self.kkt_tolerance, max_passes=self.max_passes
        )

    def semantic_dict(self) -> dict[str, Any]:
        """Config as embedded in report.json.

        Excludes `workers`: outputs are worker-count-invariant, so it is an
        execution detail, not part of the experiment's identity.
        """
        d = dataclasses.asdict(self)
        d.pop("workers")
        return d


def load_dataset(cfg: RunConfig) -> Dataset:
    path = Path(cfg.data_path)
    text = path.read_text(encoding="utf-8")
    if cfg.data_format == "libsvm":
        return parse_libsvm(text)
    return parse_csv(text, label_column=cfg.label_column, skip_header=cfg.csv_header)


def evaluate_split(
    train: Dataset, test: Dataset, cfg: TrainConfig
) -> tuple[float, int, int, MulticlassModel]:
    """Train on the full training set, score exact-label matches on test."""
    model = train_multiclass(train, cfg)
    predicted = predict_batch(model, test.features)
    right = int(np.sum(predicted == test.labels))
    error = len(test) - right
    return right / (right + error), right, error, model


@dataclass
class ExperimentReport:
    config: RunConfig
    dataset_summary: dict[str, Any]
    optimization: OptimizationReport
    test_best: tuple[float, int, int]
    test_converged: tuple[float, int, int]
    stratified_folds: bool
    final_hard_stops: int
    timings: dict[str, float]

    def to_json_dict(self) -> dict[str, Any]:
        opt = self.optimization
        flags = dict(opt.flags)
        flags["stratified_folds"] = self.stratified_folds
        flags["final_train_hard_stops"] = self.final_hard_stops
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.semantic_dict(),
            "dataset": self.dataset_summary,
            "optimization": {
                "best": {
                    "c": opt.best_point.c,
                    "sigma": opt.best_point.sigma,
                    "cv_accuracy": opt.best_accuracy,
                    "path": opt.best_path.tolist(),
                    "iteration": opt.best_iteration,
                    "ant": opt.best_ant,
                    "clamped": opt.best_point.clamped,
                },
                "converged": {
                    "c": opt.converged_point.c,
                    "sigma": opt.converged_point.sigma,
                    "path": opt.converged_path.tolist(),
                    "converged": opt.converged,
                    "modal_fraction": opt.final_modal_fraction,
                    "clamped": opt.converged_point.clamped,
                },
                "iterations": [
                    {
                        "iteration": rec.iteration,
                        "paths": rec.paths.tolist(),
                        "fitnesses": rec.fitnesses.tolist(),
                        "modal_fraction": rec.modal_fraction,
                    }
                    for rec in opt.iterations
                ],
                "evaluations": opt.evaluations,
                "flags": flags,
            },
            "test": {
                "best": {
                    "accuracy": self.test_best[0],
                    "right": self.test_best[1],
                    "error": self.test_best[2],
                },
                "converged": {
                    "accuracy": self.test_converged[0],
                    "right": self.test_converged[1],
                    "error": self.test_converged[2],
                },
            },
        }


def dataset_summary(ds: Dataset, cfg: RunConfig) -> dict[str, Any]:
    return {
        "path": cfg.data_path,
        "format": cfg.data_format,
        "samples": ds.n_samples,
        "dimension": ds.dimension,
        "classes": list(ds.classes),
        "class_counts": {str(k): v for k, v in ds.class_counts().items()},
        # features are consumed exactly as stored in the file
        "preprocessing": "none",
    }


def run_experiment(cfg: RunConfig) -> ExperimentReport:
    timings: dict[str, float] = {}
    t_total = time.perf_counter()

    t = time.perf_counter()
    ds = load_dataset(cfg)
    timings["load_s"] = time.perf_counter() - t

    t = time.perf_counter()
    train, test = split_train_test(ds, cfg.train_count, cfg.seed)
    timings["split_s"] = time.perf_counter() - t

    t = time.perf_counter()
    opt = optimize(
        train,
        cfg.cv_k,
        cfg.aco_config(),
        layout=cfg.digit_layout(),
        svm_cfg_base=cfg.train_config(),
        workers=cfg.workers,
    )
    timings["optimize_s"] = time.perf_counter() - t

    t = time.perf_counter()
    conv_cfg = cfg.train_config(opt.converged_point.c, opt.converged_point.sigma)
    acc_conv, right_conv, err_conv, model_conv = evaluate_split(train, test, conv_cfg)
    best_cfg = cfg.train_config(opt.best_point.c, opt.best_point.sigma)
    acc_best, right_best, err_best, model_best = evaluate_split(train, test, best_cfg)
    timings["final_train_and_test_s"] = time.perf_counter() - t

    plan = make_folds(len(train), cfg.cv_k, cfg.seed, labels=train.labels)
    hard_stops = int(model_conv.any_hard_stop) + int(model_best.any_hard_stop)
    timings["total_s"] = time.perf_counter() - t_total

    return ExperimentReport(
        config=cfg,
        dataset_summary=dataset_summary(ds, cfg),
        optimization=opt,
        test_best=(acc_best, right_best, err_best),
        test_converged=(acc_conv, right_conv, err_conv),
        stratified_folds=plan.stratified,
        final_hard_stops=hard_stops,
        timings=timings,
    )


def run_single_point(cfg: RunConfig, c: float, sigma: float) -> dict[str, Any]:
    """The `cv` command body: one (C, sigma) scored by CV plus a final
    train/test evaluation on the held-out split."""
    ds = load_dataset(cfg)
    train, test = split_train_test(ds, cfg.train_count, cfg.seed)
    train_cfg = cfg.train_config(c, sigma)
    plan = make_folds(len(train), cfg.cv_k, cfg.seed, labels=train.labels)
    cv: CvResult = cross_validate(
        train, cfg.cv_k, train_cfg, cfg.seed, plan=plan, workers=cfg.workers
    )
    accuracy, right, error, _ = evaluate_split(train, test, train_cfg)
    return {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.semantic_dict(),
        "point": {"c": c, "sigma": sigma},
        "cv": {
            "fold_accuracies": list(cv.fold_accuracies),
            "mean_accuracy": cv.mean_accuracy,
            "right": cv.right,
            "error": cv.error,
            "degenerate_folds": cv.degenerate_folds,
            "solver_hard_stops": cv.solver_hard_stops,
            "stratified_folds": plan.stratified,
        },
        "test": {"accuracy": accuracy, "right": right, "error": error},
        "dataset": dataset_summary(ds, cfg),
    }


def canonical_json(payload: dict[str, Any]) -> str:
    """Stable rendering: sorted keys, two-space indent, trailing newline.

    Parsing and re-rendering the output reproduces it byte for byte.
    """
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _trails_csv(report: ExperimentReport) -> str:
    lines = ["iteration,ant,x,y,fitness"]
    for rec in report.optimization.iterations:
        for ant in range(rec.paths.shape[0]):
            fitness = repr(float(rec.fitnesses[ant]))
            for x in range(rec.paths.shape[1]):
                lines.append(f"{rec.iteration},{ant},{x},{rec.paths[ant, x]},{fitness}")
    return "\n".join(lines) + "\n"


def _best_path_csv(report: ExperimentReport) -> str:
    lines = ["x,y"]
    for x, y in enumerate(report.optimization.best_path):
        lines.append(f"{x},{int(y)}")
    return "\n".join(lines) + "\n"


def emit_trails(report: ExperimentReport, out: str | Path) -> dict[str, Path]:
    """Write report.json, trails.csv, best_path.csv and timing.json.

    All contents are rendered first and each file lands via temp-and-rename,
    so an unwritable directory leaves nothing half-written.
    """
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    contents = {
        REPORT_FILE: canonical_json(report.to_json_dict()),
        TRAILS_FILE: _trails_csv(report),
        BEST_PATH_FILE: _best_path_csv(report),
        TIMING_FILE: canonical_json(
            {name: round(value, 6) for name, value in report.timings.items()}
        ),
    }
    written: dict[str, Path] = {}
    for name, text in contents.items():
        target = out_dir / name
        tmp = out_dir / f".{name}.tmp"
        with open(tmp, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, target)
        written[name] = target
    return written
