"""Regularization paths, validation-based selection and support metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Dataset, FittedModel, GroupStructure, SolverConfig
from .smoother import SmootherSet
from .solver import _system, fit

DEFAULT_GRID_COUNT = 30
DEFAULT_GRID_RATIO = 0.01


class PathFitError(RuntimeError):
    """A fit along the path failed; ``lam`` is the penalty level it failed at."""

    def __init__(self, lam, cause):
        super().__init__("fit failed at lambda=%r: %s" % (lam, cause))
        self.lam = lam


def lambda_max(dataset: Dataset, group_structure: GroupStructure, smoothers: SmootherSet) -> float:
    """Smallest penalty at which the all-zero model passes every group threshold."""
    y_c = dataset.y - dataset.y.mean()
    best = 0.0
    for members in group_structure.members:
        q = _system(smoothers, members).Q_applied(y_c)
        omega = math.sqrt(np.dot(q, q) / dataset.n)
        best = max(best, omega / math.sqrt(len(members)))
    return best


def lambda_grid(lam_max: float, count: int = DEFAULT_GRID_COUNT,
                ratio: float = DEFAULT_GRID_RATIO) -> np.ndarray:
    """``count`` log-spaced values from ``lam_max`` down to ``ratio * lam_max``."""
    if int(count) != count or count < 2:
        raise ValueError("grid count must be an integer >= 2, got %r" % (count,))
    if not 0 < ratio < 1:
        raise ValueError("grid ratio must lie in (0, 1), got %r" % (ratio,))
    if lam_max < 0:
        raise ValueError("lambda_max must be nonnegative")
    if lam_max == 0:
        return np.zeros(int(count))
    grid = lam_max * np.logspace(0.0, math.log10(ratio), int(count))
    grid[0] = lam_max
    return grid


def validation_mse(model: FittedModel, dataset: Dataset) -> float:
    r = dataset.y - model.predict(dataset.x)
    return float(np.mean(r * r))


test_mse = validation_mse
test_mse.__doc__ = "Mean squared prediction error of ``model`` on ``dataset``."


@dataclass(frozen=True, eq=False)
class PathResult:
    lambdas: np.ndarray
    models: list
    validation_mse: np.ndarray
    selected_index: int
    algorithm: str = "groupspam"
    grid: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def selected(self) -> FittedModel:
        return self.models[self.selected_index]

    @property
    def selected_lambda(self) -> float:
        return float(self.lambdas[self.selected_index])


def _fit_one(train, groups, smoothers, config, algorithm, init):
    if algorithm == "groupspam" and not groups.is_partition:
        from .overlap import fit_overlap

        return fit_overlap(train, groups, config, smoothers=smoothers, init=init)
    return fit(train, groups, smoothers, config, algorithm=algorithm, init=init)


def _warm_start(model, algorithm, groups):
    if model is None:
        return None
    if algorithm == "groupspam" and not groups.is_partition:
        return model.latent.f_hat
    return model.f_hat


def fit_path(train: Dataset, validation: Dataset, group_structure: GroupStructure,
             grid_count: int = DEFAULT_GRID_COUNT, grid_ratio: float = DEFAULT_GRID_RATIO,
             config: SolverConfig = None, algorithm: str = "groupspam",
             smoothers: SmootherSet = None, lambdas=None, patience: Optional[int] = None) -> PathResult:
    """Fit a warm-started path from ``lambda_max`` downwards and select by validation MSE.

    Parameters
    ----------
    train, validation : Dataset
        Must share the covariate dimension.
    group_structure : GroupStructure
        Used by ``algorithm="groupspam"``; overlapping structures go through the
        latent-function expansion. SpAM always uses singleton groups.
    grid_count, grid_ratio : int, float
        Log-spaced grid definition, ignored when ``lambdas`` is given.
    patience : int, optional
        Stop descending once the validation error has not improved on its
        running minimum for this many consecutive penalty values. ``None``
        fits the whole grid.

    Returns
    -------
    PathResult
        Models for the fitted penalties. Ties in validation error go to the
        larger penalty.
    """
    if train.p != validation.p:
        raise ValueError("train has p=%d but validation has p=%d" % (train.p, validation.p))
    config = config or SolverConfig()
    if smoothers is None:
        smoothers = SmootherSet.from_dataset(train)
    groups = group_structure
    if algorithm == "spam":
        groups = GroupStructure.singletons(train.p)
    elif algorithm == "backfit":
        groups = GroupStructure.singletons(train.p)
    if lambdas is None:
        if algorithm == "backfit":
            lambdas = np.zeros(1)
        else:
            lambdas = lambda_grid(lambda_max(train, groups, smoothers), grid_count, grid_ratio)
    grid = np.asarray(lambdas, dtype=float)

    models, errors = [], []
    best, since_best = math.inf, 0
    prev = None
    for lam in grid:
        try:
            model = _fit_one(train, groups, smoothers, config.with_lambda(float(lam)),
                             algorithm, _warm_start(prev, algorithm, groups))
        except Exception as exc:
            raise PathFitError(float(lam), exc) from exc
        err = validation_mse(model, validation)
        models.append(model)
        errors.append(err)
        prev = model
        if err < best:
            best, since_best = err, 0
        else:
            since_best += 1
            if patience is not None and since_best >= patience:
                break
    errors = np.asarray(errors)
    return PathResult(
        lambdas=grid[:len(models)].copy(),
        models=models,
        validation_mse=errors,
        selected_index=int(np.argmin(errors)),  # first minimum = largest lambda
        algorithm=algorithm,
        grid=grid,
    )


@dataclass(frozen=True)
class SupportMetrics:
    precision: float
    recall: float
    size: int
    per_covariate_selected: tuple = field(repr=False, default=())


def support_metrics(model_or_support, true_support, p: Optional[int] = None) -> SupportMetrics:
    """Precision, recall and size of an estimated support.

    An empty estimate has precision 1 when the true support is also empty and
    0 otherwise; recall against an empty truth is 1.
    """
    if isinstance(model_or_support, FittedModel):
        est = set(model_or_support.active_set)
        p = model_or_support.p if p is None else p
    else:
        est = set(int(j) for j in model_or_support)
    truth = set(int(j) for j in true_support)
    if p is None:
        p = max(est | truth, default=-1) + 1
    hit = len(est & truth)
    if est:
        precision = hit / len(est)
    else:
        precision = 1.0 if not truth else 0.0
    recall = hit / len(truth) if truth else 1.0
    return SupportMetrics(
        precision=float(precision),
        recall=float(recall),
        size=len(est),
        per_covariate_selected=tuple(j in est for j in range(p)),
    )
