# %% [markdown]
# # Regularity scale, bad sets and singular counts

# %%
import numpy as np

from bihmap import GridDomain, planted_multi, radial
from bihmap.regscale import RegScale
from bihmap.strata import Box, bad_scan, count_singular

d = GridDomain(5, 24, 23 / 48)
rs = RegScale(radial(5).rasterize(d))

# %% [markdown]
# For x/|x|, r_f is proportional to the distance from the origin. The continuum
# ratio is 3/16. The discrete jets undershoot near the core, so the ratio comes
# out a little higher.

# %%
for s in (0.05, 0.1, 0.2):
    x = np.array([s, 0.013, -0.021, 0.007, 0.011])
    print(s, rs.reg_scale(x) / np.linalg.norm(x))

# %% [markdown]
# The tube volume around the bad set {r_f <= r} scales like r^5.

# %%
rr = np.geomspace(0.5, 1.0, 9) * d.h
print("bad-set slope", round(bad_scan(rs, rr, 0.45).slope, 2))

# %% [markdown]
# Planted singular points are counted by packing the local minima of r_f.

# %%
centers = [(-0.15, -0.1, 0, 0, 0), (0.15, -0.1, 0, 0, 0), (0, 0.15, 0, 0, 0)]
c = count_singular(planted_multi(5, centers, 0.14).rasterize(d), 0.75 * d.h)
print(c.count, np.round(c.representatives, 3), c.counts)
