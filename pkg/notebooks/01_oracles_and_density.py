# %% [markdown]
# # Oracle maps and the monotone density
# x/|x| in m=5 is the model point singularity. Its density is the same at every
# radius, and the exact value serves as a yardstick for the grid quadrature.

# %%
import numpy as np

from bihmap import GridDomain, exact_theta, radial, theta
from bihmap.monotonicity import DensityEvaluator

o = radial(5)
print("exact:", [round(exact_theta(o, np.zeros(5), r), 4) for r in (0.1, 0.2, 0.4)], "64 pi^2 =", 64 * np.pi**2)

# %% [markdown]
# Rasterize on an offset grid, where the origin is a cell center, and evaluate
# the grid density on a ladder of radii. The error is first order in h/r: it
# halves when r doubles.

# %%
d = GridDomain(5, 24, 23 / 48)
f = o.rasterize(d)
ev = DensityEvaluator(f, np.zeros(5), 0.4)
for r in (0.2, 0.3, 0.4):
    th = ev.theta(r)
    print(f"r={r}: theta={th:.2f}  relative error {1 - th / (64 * np.pi**2):.3f}")

# %% [markdown]
# The two routes to W(s, t): the difference of densities, and four times the
# annulus integral. For a 0-homogeneous map the annulus integrand vanishes
# identically, so the annulus route is near 0. The density difference also
# picks up the r-dependent quadrature error.

# %%
for s, t in [(0.2, 0.25), (0.3, 0.4)]:
    q = ev.monotone_diff(s, t)
    print(f"(s,t)=({s},{t}): w_theta={q.w_theta:.3f}  w_annulus={q.w_annulus:.3f}")

# %% [markdown]
# Away from the singular point the density is small.

# %%
print(theta(f, np.array([0.2, 0, 0, 0, 0]), 0.17), ev.theta(0.2))
