"""Soft-margin SVM with a Gaussian kernel, trained by pairwise coordinate
ascent (SMO) on the dual, plus a one-vs-one wrapper for multiclass data.

The dual solved here is

    max  sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j k(x_i, x_j)
    s.t. 0 <= alpha_i <= C,   sum_i alpha_i y_i = 0

and the decision function stays kernelized throughout; the primal weight
vector is never materialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .data import BinaryView, Dataset, binary_view

# Cache the full Gram matrix below this many samples; recompute rows above.
GRAM_CACHE_LIMIT = 2000

# Absolute ceiling on solver passes; hitting it sets SvmModel.hard_stop.
HARD_PASS_CAP = 10_000

_STEP_EPS = 1e-12  # relative threshold below which a pair step is a no-op
_ALPHA_SNAP = 1e-10  # snap-to-bound width, relative to C


class SolverError(RuntimeError):
    """Training could not proceed (bad inputs, non-finite kernel)."""


@dataclass(frozen=True)
class KernelParam:
    """Length scale of the Gaussian kernel."""

    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")


@dataclass(frozen=True)
class TrainConfig:
    """Box constraint, kernel width and stopping rules for one training run."""

    c: float
    sigma: float
    kkt_tolerance: float = 1e-3
    max_passes: int = 10  # consecutive update-free passes before stopping

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c > 0):
            raise ValueError(f"c must be positive and finite, got {self.c}")
        KernelParam(self.sigma)
        if self.kkt_tolerance <= 0:
            raise ValueError("kkt_tolerance must be positive")
        if self.max_passes < 1:
            raise ValueError("max_passes must be at least 1")

    @property
    def kernel(self) -> KernelParam:
        return KernelParam(self.sigma)

    def with_params(self, c: float, sigma: float) -> "TrainConfig":
        return TrainConfig(c, sigma, self.kkt_tolerance, self.max_passes)


def rbf_kernel(x1: np.ndarray, x2: np.ndarray, sigma: float) -> float:
    """exp(-||x1 - x2||^2 / (2 sigma^2)); 1.0 exactly when x1 == x2."""
    KernelParam(sigma)
    a = np.asarray(x1, dtype=np.float64)
    b = np.asarray(x2, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"vectors must share one shape, got {a.shape} vs {b.shape}")
    d = a - b
    return float(np.exp(-(d @ d) / (2.0 * sigma * sigma)))


def rbf_gram(x1: np.ndarray, x2: np.ndarray, sigma: float) -> np.ndarray:
    """Kernel matrix between two sample blocks.

    Squared distances come from explicit differencing (deterministic
    summation order, exact zeros on identical rows) as long as the
    intermediate fits comfortably in memory; otherwise the usual
    norm-expansion with clipping.
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.shape[1] != x2.shape[1]:
        raise ValueError("sample blocks disagree on dimension")
    if x1.shape[0] * x2.shape[0] * x1.shape[1] <= 20_000_000:
        diff = x1[:, None, :] - x2[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diff, diff)
    else:
        sq = (
            (x1 * x1).sum(axis=1)[:, None]
            + (x2 * x2).sum(axis=1)[None, :]
            - 2.0 * (x1 @ x2.T)
        )
        np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * sigma * sigma))


@dataclass
class SvmModel:
    """Dual solution for one binary problem.

    `alphas` keeps one coefficient per training sample; the support arrays
    hold the subset with alpha > 0 that the decision function actually uses.
    """

    alphas: np.ndarray
    bias: float
    support_x: np.ndarray
    support_y: np.ndarray
    support_alpha: np.ndarray
    config: TrainConfig
    objective_by_pass: list[float] = field(default_factory=list)
    n_passes: int = 0
    hard_stop: bool = False

    @property
    def n_support(self) -> int:
        return self.support_x.shape[0]

    @property
    def dimension(self) -> int:
        return self.support_x.shape[1] if self.n_support else 0


def _dual_objective(u: np.ndarray, alphas: np.ndarray, gram: np.ndarray) -> float:
    ku = np.einsum("ij,j->i", gram, u)
    return float(alphas.sum() - 0.5 * (u @ ku))


def train_binary(train: BinaryView, cfg: TrainConfig) -> SvmModel:
    """Solve the dual for one +1/-1 problem by SMO.

    Each pass sweeps the samples in index order; a KKT violator becomes the
    first index of a working pair and the partner is chosen to maximize
    |E1 - E2| (falling back through non-bound then all candidates, in index
    order, when a step makes no progress). The solver stops after
    `cfg.max_passes` consecutive passes without an accepted step, or flags
    `hard_stop` at the absolute pass cap.
    """
    x = np.asarray(train.x, dtype=np.float64)
    y = np.asarray(train.y, dtype=np.float64)
    n = x.shape[0]
    if n < 2 or len(np.unique(y)) < 2:
        raise SolverError("training requires at least one sample of each class")

    if n <= GRAM_CACHE_LIMIT:
        gram = rbf_gram(x, x, cfg.sigma)
    else:
        gram = None  # row-on-demand path, same arithmetic per row
    if gram is not None and not np.all(np.isfinite(gram)):
        raise SolverError("kernel matrix contains non-finite values")

    def krow(i: int) -> np.ndarray:
        if gram is not None:
            return gram[i]
        return rbf_gram(x[i : i + 1], x, cfg.sigma)[0]

    c = float(cfg.c)
    tol = float(cfg.kkt_tolerance)
    snap = _ALPHA_SNAP * max(1.0, c)
    alphas = np.zeros(n, dtype=np.float64)
    b = 0.0
    # E_i = f(x_i) - y_i, refreshed at every pass boundary and patched
    # incrementally after each accepted step.
    errors = -y.copy()
    objective: list[float] = []

    def take_step(i: int, j: int) -> bool:
        nonlocal b, errors
        if i == j:
            return False
        a_i, a_j = float(alphas[i]), float(alphas[j])
        y_i, y_j = float(y[i]), float(y[j])
        e_i, e_j = float(errors[i]), float(errors[j])
        if y_i != y_j:
            lo = max(0.0, a_j - a_i)
            hi = min(c, c + a_j - a_i)
        else:
            lo = max(0.0, a_i + a_j - c)
            hi = min(c, a_i + a_j)
        if lo >= hi:
            return False
        k_i = krow(i)
        k_j = krow(j)
        eta = float(k_i[i]) + float(k_j[j]) - 2.0 * float(k_i[j])
        if eta <= 0.0:
            # degenerate direction (duplicate points); no ascent available
            return False
        a_j_new = a_j + y_j * (e_i - e_j) / eta
        a_j_new = min(hi, max(lo, a_j_new))
        if abs(a_j_new - a_j) < _STEP_EPS * (a_j_new + a_j + _STEP_EPS):
            return False
        a_i_new = a_i + y_i * y_j * (a_j - a_j_new)
        if a_i_new < snap:
            a_i_new = 0.0
        elif a_i_new > c - snap:
            a_i_new = c
        if a_j_new < snap:
            a_j_new = 0.0
        elif a_j_new > c - snap:
            a_j_new = c

        d_i = a_i_new - a_i
        d_j = a_j_new - a_j
        b1 = b - e_i - y_i * d_i * float(k_i[i]) - y_j * d_j * float(k_i[j])
        b2 = b - e_j - y_i * d_i * float(k_i[j]) - y_j * d_j * float(k_j[j])
        if 0.0 < a_i_new < c:
            b_new = b1
        elif 0.0 < a_j_new < c:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)

        alphas[i] = a_i_new
        alphas[j] = a_j_new
        errors += y_i * d_i * k_i + y_j * d_j * k_j + (b_new - b)
        b = b_new
        return True

    def examine(i: int) -> bool:
        a_i = float(alphas[i])
        r = float(errors[i]) * float(y[i])
        if not ((r < -tol and a_i < c) or (r > tol and a_i > 0.0)):
            return False
        non_bound = np.flatnonzero((alphas > 0.0) & (alphas < c))
        if non_bound.size > 1:
            gaps = np.abs(float(errors[i]) - errors[non_bound])
            j = int(non_bound[int(np.argmax(gaps))])
            if take_step(i, j):
                return True
        for j in non_bound:
            if take_step(i, int(j)):
                return True
        for j in range(n):
            if take_step(i, j):
                return True
        return False

    clean = 0
    passes = 0
    hard_stop = False
    while clean < cfg.max_passes:
        if passes >= HARD_PASS_CAP:
            hard_stop = True
            break
        # refresh the error cache so incremental drift cannot accumulate
        u = alphas * y
        if gram is not None:
            errors = np.einsum("ij,j->i", gram, u) + b - y
        else:
            errors = np.array([float(krow(i) @ u) for i in range(n)]) + b - y
        changed = 0
        for i in range(n):
            if examine(i):
                changed += 1
        passes += 1
        if gram is not None:
            objective.append(_dual_objective(alphas * y, alphas, gram))
        clean = clean + 1 if changed == 0 else 0

    if gram is None:
        objective.append(
            float(alphas.sum())
            - 0.5 * float(sum((alphas * y)[i] * (krow(i) @ (alphas * y)) for i in range(n)))
        )

    support = np.flatnonzero(alphas > 0.0)
    return SvmModel(
        alphas=alphas,
        bias=float(b),
        support_x=x[support].copy(),
        support_y=y[support].copy(),
        support_alpha=alphas[support].copy(),
        config=cfg,
        objective_by_pass=objective,
        n_passes=passes,
        hard_stop=hard_stop,
    )


def decision_value(model: SvmModel, x: np.ndarray) -> float:
    """f(x) = sum_i alpha_i y_i k(x_i, x) + b over the support set."""
    x = np.asarray(x, dtype=np.float64)
    if model.n_support and x.shape != (model.dimension,):
        raise ValueError(f"expected vector of length {model.dimension}, got {x.shape}")
    return float(decision_values(model, x[None, :])[0]) if model.n_support else model.bias


def decision_values(model: SvmModel, x: np.ndarray) -> np.ndarray:
    """Vectorized decision function over rows of `x`."""
    x = np.asarray(x, dtype=np.float64)
    if not model.n_support:
        return np.full(x.shape[0], model.bias)
    if x.shape[1] != model.dimension:
        raise ValueError(f"expected dimension {model.dimension}, got {x.shape[1]}")
    k = rbf_gram(model.support_x, x, model.config.sigma)
    return np.einsum("i,ij->j", model.support_alpha * model.support_y, k) + model.bias


def predict_binary(model: SvmModel, x: np.ndarray) -> int:
    """Sign of the decision value; exact zero resolves to +1."""
    return 1 if decision_value(model, x) >= 0.0 else -1


@dataclass
class MulticlassModel:
    """One-vs-one ensemble: one binary machine per unordered class pair."""

    pairwise: dict[tuple[int, int], SvmModel]
    classes: tuple[int, ...]
    dimension: int

    @property
    def any_hard_stop(self) -> bool:
        return any(m.hard_stop for m in self.pairwise.values())


def train_multiclass(ds: Dataset, cfg: TrainConfig) -> MulticlassModel:
    """Train a binary machine for every class pair on that pair's samples.

    The smaller class id of each pair plays the +1 role.
    """
    classes = ds.classes
    if len(classes) < 2:
        raise SolverError("multiclass training requires at least two classes")
    pairwise: dict[tuple[int, int], SvmModel] = {}
    for a, b in combinations(classes, 2):
        try:
            pairwise[(a, b)] = train_binary(binary_view(ds, a, b), cfg)
        except SolverError as exc:
            raise SolverError(f"pair ({a}, {b}): {exc}") from exc
    return MulticlassModel(pairwise=pairwise, classes=classes, dimension=ds.dimension)


def predict(model: MulticlassModel, x: np.ndarray) -> int:
    """Majority vote over pairwise machines; ties go to the smallest class."""
    return int(predict_batch(model, np.asarray(x, dtype=np.float64)[None, :])[0])


def predict_batch(model: MulticlassModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != model.dimension:
        raise ValueError(f"expected dimension {model.dimension}, got {x.shape[1]}")
    index = {c: i for i, c in enumerate(model.classes)}
    votes = np.zeros((x.shape[0], len(model.classes)), dtype=np.int64)
    for (a, b), machine in model.pairwise.items():
        values = decision_values(machine, x)
        winner_a = values >= 0.0
        votes[winner_a, index[a]] += 1
        votes[~winner_a, index[b]] += 1
    # argmax returns the first maximum: classes are sorted, so ties resolve
    # to the smallest class id
    picks = np.argmax(votes, axis=1)
    return np.asarray([model.classes[p] for p in picks], dtype=np.int64)
