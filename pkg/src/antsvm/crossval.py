"""k-fold cross-validation accuracy, the fitness signal for the colony.

Per-fold accuracy is Right/(Right+Error) on the held-out fold and the
overall score is the plain mean of the k fold accuracies.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .rng import STREAM_FOLDS, stream
from .svm import TrainConfig, predict_batch, train_multiclass


@dataclass(frozen=True)
class FoldPlan:
    """Per-sample fold assignment; folds are exhaustive and near-equal."""

    k: int
    assignments: np.ndarray  # (n,) ints in [0, k)
    stratified: bool

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=np.int64)
        object.__setattr__(self, "assignments", a)
        counts = np.bincount(a, minlength=self.k)
        if counts.min() == 0:
            raise ValueError("every fold must receive at least one sample")
        if counts.max() - counts.min() > 1:
            raise ValueError("fold sizes may differ by at most one")

    def fold_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def rest_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


@dataclass(frozen=True)
class CvResult:
    fold_accuracies: tuple[float, ...]
    mean_accuracy: float
    right: int
    error: int
    degenerate_folds: int = 0
    solver_hard_stops: int = 0


def make_folds(
    n: int, k: int, seed: int, labels: np.ndarray | None = None
) -> FoldPlan:
    """Seeded fold assignment for `n` samples.

    Stratified by class when labels are supplied and every class has at
    least k members; plain shuffled assignment (and stratified=False)
    otherwise. Fold sizes always differ by at most one.
    """
    if not (2 <= k <= n):
        raise ValueError(f"k must be in [2, {n}], got {k}")
    rng = stream(seed, STREAM_FOLDS)
    assignments = np.empty(n, dtype=np.int64)
    stratified = False
    if labels is not None:
        labels = np.asarray(labels)
        classes, counts = np.unique(labels, return_counts=True)
        stratified = bool(counts.min() >= k)
    if stratified:
        # deal each class's shuffled members to folds with a cursor that
        # carries across classes, keeping global sizes balanced
        cursor = int(rng.integers(k))
        for cls in classes:
            members = np.flatnonzero(labels == cls)
            members = members[rng.permutation(members.size)]
            for idx in members:
                assignments[idx] = cursor
                cursor = (cursor + 1) % k
    else:
        order = rng.permutation(n)
        for pos, idx in enumerate(order):
            assignments[idx] = pos % k
    return FoldPlan(k=k, assignments=assignments, stratified=stratified)


def _evaluate_fold(
    ds: Dataset, plan: FoldPlan, held_out: int, cfg: TrainConfig
) -> tuple[float, int, int, bool, bool]:
    """Returns (accuracy, right, error, degenerate, hard_stop) for one fold."""
    test_idx = plan.fold_indices(held_out)
    train_idx = plan.rest_indices(held_out)
    train_part = ds.subset(train_idx)
    test_part = ds.subset(test_idx)
    if len(train_part.classes) < 2:
        # keep the colony moving: a fold whose training part collapsed to a
        # single class scores zero instead of aborting the whole candidate
        return 0.0, 0, len(test_part), True, False
    model = train_multiclass(train_part, cfg)
    predicted = predict_batch(model, test_part.features)
    right = int(np.sum(predicted == test_part.labels))
    error = len(test_part) - right
    return right / (right + error), right, error, False, model.any_hard_stop


def fold_accuracy(
    ds: Dataset, plan: FoldPlan, held_out: int, cfg: TrainConfig
) -> float:
    """Train on the other k-1 folds, score the held-out fold."""
    if not (0 <= held_out < plan.k):
        raise ValueError(f"held_out must be in [0, {plan.k}), got {held_out}")
    return _evaluate_fold(ds, plan, held_out, cfg)[0]


def cross_validate(
    ds: Dataset,
    k: int,
    cfg: TrainConfig,
    seed: int,
    plan: FoldPlan | None = None,
    workers: int = 1,
) -> CvResult:
    """Mean held-out accuracy over k seeded folds.

    Folds may be evaluated concurrently; results are always combined by
    fold index, so the outcome is identical for any worker count.
    """
    if plan is None:
        plan = make_folds(len(ds), k, seed, labels=ds.labels)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(
                pool.map(lambda f: _evaluate_fold(ds, plan, f, cfg), range(plan.k))
            )
    else:
        outcomes = [_evaluate_fold(ds, plan, f, cfg) for f in range(plan.k)]
    accuracies = tuple(o[0] for o in outcomes)
    return CvResult(
        fold_accuracies=accuracies,
        mean_accuracy=float(np.mean(accuracies)),
        right=sum(o[1] for o in outcomes),
        error=sum(o[2] for o in outcomes),
        degenerate_folds=sum(1 for o in outcomes if o[3]),
        solver_hard_stops=sum(1 for o in outcomes if o[4]),
    )
