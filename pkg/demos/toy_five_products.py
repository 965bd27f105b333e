"""
Spectral ranking on five products
=================================

Seven choice events over five products, with choice sets of sizes 2 to 4.
Shows the transition matrix, its stationary distribution and the graph
diagnostics.
"""

import numpy as np

from spectral_rank import (ComparisonDataset, WeightScheme, build_transition,
                           check_rankability, fit)

# each record is (choice set, chosen item); items are numbered from 0
records = [((1, 2, 3, 4), 2), ((0, 1, 2), 1), ((1, 4), 1), ((3, 4), 3),
           ((1, 3), 3), ((0, 3), 0), ((3, 4), 4)]
ds = ComparisonDataset.from_comparisons(records, n_items=5)

# with constant weights P[i, j] counts how often j beat i, divided by d
T = build_transition(ds, WeightScheme.constant())
np.set_printoptions(precision=3, suppress=True)
print("d =", T.d)
print(T.P)

# stationary distribution and centred log scores
f = fit(ds, "constant")
print("pi    :", f.pi_hat)
print("theta :", f.theta)
print("ranks :", f.ranks())

# the same data with set-size weights and the two-step refit
for scheme in ("vanilla", "two_step"):
    print(scheme, fit(ds, scheme).theta)

# degree counts, connectivity and the spectrum of the plug-in Omega matrix
diag = check_rankability(ds, compute_spectrum=True)
print(diag.as_dict())
