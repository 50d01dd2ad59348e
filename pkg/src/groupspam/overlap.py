"""Overlapping groups through latent-function duplication.

Every (group, member) pair gets its own copy of the member's column, which
turns an overlapping group structure into a partition of the copies. The
fitted latent components are summed back per original covariate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, FittedModel, GroupStructure, SolverConfig
from .smoother import SmootherSet
from .solver import fit_groupspam


@dataclass(frozen=True, eq=False)
class OverlapExpansion:
    expanded_dataset: Dataset
    expanded_groups: GroupStructure
    column_map: tuple  # expanded column -> (original covariate, group index)
    original_groups: GroupStructure

    @property
    def source_columns(self) -> list:
        return [j for j, _ in self.column_map]


def expand_overlap(dataset: Dataset, group_structure: GroupStructure) -> OverlapExpansion:
    if group_structure.p != dataset.p:
        raise ValueError("group structure covers %d covariates, data has %d"
                         % (group_structure.p, dataset.p))
    column_map = []
    expanded = []
    for g, (name, members) in enumerate(group_structure.groups):
        start = len(column_map)
        column_map.extend((j, g) for j in members)
        expanded.append((name, tuple(range(start, len(column_map)))))
    src = [j for j, _ in column_map]
    names = dataset.column_names or tuple("x%d" % (j + 1) for j in range(dataset.p))
    new_names = tuple("%s@%s" % (names[j], group_structure.groups[g][0]) for j, g in column_map)
    return OverlapExpansion(
        expanded_dataset=Dataset(dataset.x[:, src], dataset.y, new_names),
        expanded_groups=GroupStructure(tuple(expanded), len(column_map)),
        column_map=tuple(column_map),
        original_groups=group_structure,
    )


def collapse_latent(expanded_model: FittedModel, expansion: OverlapExpansion) -> FittedModel:
    """Sum latent components per original covariate.

    The collapsed active set is the union of the members of every group whose
    latent block is nonzero. The expanded model stays reachable as ``latent``.
    """
    column_map = expansion.column_map
    if expanded_model.p != len(column_map):
        raise ValueError("model has %d components but the column map has %d entries"
                         % (expanded_model.p, len(column_map)))
    groups = expansion.original_groups
    p = groups.p
    if any(not 0 <= j < p or not 0 <= g < len(groups) for j, g in column_map):
        raise ValueError("column map refers to covariates or groups outside the structure")
    n = expanded_model.n
    f = np.zeros((p, n))
    train_x = np.zeros((n, p))
    bandwidths = np.zeros(p)
    active_groups = set()
    for col, (j, g) in enumerate(column_map):
        f[j] += expanded_model.f_hat[col]
        train_x[:, j] = expanded_model.train_x[:, col]
        bandwidths[j] = expanded_model.bandwidths[col]
        if col in expanded_model.active_set:
            active_groups.add(g)
    active = set()
    for g in active_groups:
        active.update(groups.members[g])
    return FittedModel(
        f_hat=f,
        y_mean=expanded_model.y_mean,
        train_x=train_x,
        train_y=expanded_model.train_y,
        bandwidths=bandwidths,
        lam=expanded_model.lam,
        active_set=active,
        group_structure=groups,
        algorithm=expanded_model.algorithm,
        converged=expanded_model.converged,
        n_iter=expanded_model.n_iter,
        objective=expanded_model.objective,
        latent=expanded_model,
    )


def fit_overlap(dataset: Dataset, group_structure: GroupStructure, config: SolverConfig,
                smoothers: SmootherSet = None, init=None) -> FittedModel:
    """GroupSpAM with overlap: expand, fit the partition, collapse.

    ``smoothers`` are per original covariate and are shared by all copies.
    ``init`` is a latent (expanded) warm start.
    """
    expansion = expand_overlap(dataset, group_structure)
    if smoothers is None:
        smoothers = SmootherSet.from_dataset(dataset)
    expanded_smoothers = smoothers.take(expansion.source_columns)
    model = fit_groupspam(expansion.expanded_dataset, expansion.expanded_groups,
                          expanded_smoothers, config, init=init)
    return collapse_latent(model, expansion)
