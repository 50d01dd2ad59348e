"""
Overlapping groups
==================

A covariate may sit in several groups. Each membership gets its own latent
component; the fitted component of a covariate is the sum of its copies, and
the selected covariates always form a union of whole groups.
"""

import numpy as np

from groupspam import GroupStructure, Scenario, SolverConfig, fit_overlap, make_scenario
from groupspam.modelsel import lambda_max
from groupspam.overlap import expand_overlap
from groupspam.smoother import SmootherSet

data = make_scenario(Scenario(n=120, p=12, seed=2))
groups = GroupStructure((
    ("left", (0, 1, 2, 3, 4)),
    ("middle", (4, 5, 6, 7)),
    ("right", (7, 8, 9, 10, 11)),
), 12)

smoothers = SmootherSet.from_dataset(data.train)
ex = expand_overlap(data.train, groups)
lmax = lambda_max(ex.expanded_dataset, ex.expanded_groups, smoothers.take(ex.source_columns))

for frac in (0.8, 0.5, 0.2):
    model = fit_overlap(data.train, groups, SolverConfig(lam=frac * lmax), smoothers=smoothers)
    active = sorted(j + 1 for j in model.active_set)
    latent_groups = sorted({groups.names[ex.column_map[c][1]] for c in model.latent.active_set})
    print("lambda = %.2f lambda_max: groups %s -> covariates %s" % (frac, latent_groups, active))

# covariate 5 belongs to two groups: its fit is the sum of two latent pieces
x5 = [c for c, (j, _) in enumerate(ex.column_map) if j == 4]
print("copies of x5:", [ex.expanded_dataset.column_names[c] for c in x5])
print("sum of copies equals collapsed fit:",
      np.allclose(model.latent.f_hat[x5].sum(axis=0), model.f_hat[4]))
