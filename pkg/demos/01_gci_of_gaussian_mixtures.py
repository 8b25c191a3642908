"""Weighted geometric means of Gaussian mixtures.

Run with ``python demos/01_gci_of_gaussian_mixtures.py``.
"""
# %%
import numpy as np

from rfs_fusion import GaussianMixture, gci_fuse_gaussian_mixtures
from rfs_fusion.diagnostics import DiscreteSpace, discretize, gci_fuse_discrete, total_variation
from rfs_fusion.fusion import FusionConfig, gci_fuse_gmb_pair
from rfs_fusion.labeled_rfs import MbDensity


def gm1(weights, means, variances):
    return GaussianMixture(np.asarray(weights, float), np.asarray(means, float)[:, None],
                           np.asarray(variances, float)[:, None, None])


# %% [markdown]
# Two unit-variance Gaussians two units apart: the equal-weight geometric
# mean is the Gaussian halfway between them, and the normaliser is exp(-1/2).

# %%
fused, eta = gci_fuse_gaussian_mixtures(gm1([1], [0], [1]), 0.5, gm1([1], [2], [1]), 0.5)
print("fused mean", fused.means.ravel(), "variance", fused.covs.ravel(), "eta", eta, "exp(-1/2)", np.exp(-0.5))

# %% [markdown]
# Mixtures are raised to a power component by component, which is accurate
# when components barely overlap.  A bimodal density fused with a unimodal
# one keeps only the mode they agree on.

# %%
p1 = gm1([0.5, 0.5], [-20.0, 20.0], [1.0, 1.0])
p2 = gm1([1.0], [19.0], [4.0])
fused, eta = gci_fuse_gaussian_mixtures(p1, 0.5, p2, 0.5)
for w, m in zip(fused.weights, fused.means.ravel()):
    print(f"component at {m:7.3f} with weight {w:.3g}")

# %% [markdown]
# Multi-Bernoulli fusion checked against brute-force GCI on a grid.

# %%
mb1 = MbDensity({0: (0.9, gm1([1], [-15.0], [1.0])), 1: (0.6, gm1([1], [15.0], [2.0]))})
mb2 = MbDensity({0: (0.7, gm1([1], [14.5], [1.5]))})
fused = gci_fuse_gmb_pair(mb1, mb2, FusionConfig(weights=(0.5, 0.5)))
space = DiscreteSpace.grid_1d(-30, 30, 400, max_cardinality=2)
oracle = gci_fuse_discrete([(discretize(mb1, space), 0.5), (discretize(mb2, space), 0.5)])
print("hypotheses", len(fused), "total variation to grid oracle", total_variation(discretize(fused, space), oracle))
