# %% [markdown]
# # Homogeneity deficits and quantitative strata

# %%
import numpy as np

from bihmap import GridDomain, cylindrical, radial
from bihmap.homogeneity import LatticeSpec, deficit_table, fit_homogeneous
from bihmap.strata import Box, fail_scales, grid_samples, minkowski_scan

d = GridDomain(5, 24, 23 / 48)
f = radial(5).rasterize(d)

# %% [markdown]
# x/|x| is 0-homogeneous about the origin, but not invariant along any line.
# The k=1 deficit is a scale-free constant, 2 − 9π/16.

# %%
T = deficit_table(f, np.zeros(5), [0.1, 0.2, 0.4], LatticeSpec.coarse())
print(np.round(T.deficits, 4))
print("2 - 9 pi/16 =", 2 - 9 * np.pi / 16)

# %% [markdown]
# For the cylindrical projection the best invariant direction is the suppressed axis.

# %%
g = cylindrical(5, 1).rasterize(d)
fit = fit_homogeneous(g, np.zeros(5), 0.2, 1)
print("deficit", fit.deficit, "plane", np.round(fit.plane, 3))

# %% [markdown]
# The S^0 stratum of x/|x| collects the points whose blow-ups stay far from every
# 1-homogeneous map at all scales down to r. Its tube volume scales like
# rho^5, the volume law of a point in R^5.

# %%
h = d.h
radii = np.array([2, 2.5, 3, 3.5, 4]) * h
S = grid_samples(d, np.zeros(5), 6 * h, stride=2)
fs = fail_scales(f, 0, 0.1 * (2 - 9 * np.pi / 16), list(radii), S, LatticeSpec(32, 4, 2, 2), 1)
scan = minkowski_scan(fs, radii, 0.45, 2 * h)
print("members", scan.members, "slope", round(scan.slope, 2))
