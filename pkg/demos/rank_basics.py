"""
Empirical multivariate ranks
============================

Ranks are obtained by optimally matching a sample to a fixed reference set
of points in the unit cube. In one dimension, against the lattice i/n, this
reproduces the usual ranks divided by n.
"""

import numpy as np
from scipy.stats import rankdata

from dfassoc import compute_ranks, make_halton, make_lattice_1d

rng = np.random.default_rng(0)

# one dimension: optimal matching to {1/n, ..., 1} is the sorted order
x = rng.standard_cauchy(8)
r = compute_ranks(x, make_lattice_1d(8))
print("sample         ", np.round(x, 2))
print("OT ranks       ", r.ranks[:, 0])
print("classical / n  ", rankdata(x) / 8)

# two dimensions: ranks are Halton points, each used exactly once
z = rng.standard_normal((200, 2))
grid = make_halton(200, 2)
rz = compute_ranks(z, grid)
print("\nassignment cost", round(rz.cost, 3))
print("points used once:", len(np.unique(rz.perm)) == 200)

# ranks of a Gaussian sample should look uniform on the square
print("rank coordinate means", np.round(rz.ranks.mean(axis=0), 3))
