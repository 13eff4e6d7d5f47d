"""
Ranking the terms of a learned model
====================================

Weight every active basis function by its coefficient, take the SVD of the
resulting matrix and rank the terms by their singular-value-weighted
coordinates. The cumulative column shows how much of the total weight the
top-ranked terms carry.
"""

import numpy as np

from gastridge import svd_rank_matrix

# a toy weighted feature matrix: one dominant column, two medium, one tiny
rng = np.random.default_rng(0)
t = np.linspace(0, 10, 500)
S = np.column_stack([
    0.02 * np.sin(t),
    0.30 * np.tanh(t - 5),
    0.05 * rng.standard_normal(t.size),
    1e-4 * t,
])
report = svd_rank_matrix(S, descriptor_ids=[3, 37, 12, 2])

print("singular values:", np.round(report.singular_values, 4))
print("rank  id      xbar   cumulative")
for rank, did, _, _, xbar, cum in report.rows():
    print(f"{rank:4d} {did:3d} {xbar:+9.5f}   {cum:.3f}")

# the same ranking on a trained model is ``svd_rank(model, trace)``;
# see hybrid_model.py for producing one.
