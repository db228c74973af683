import numpy as np
import pytest

from bihmap.grid import GridDomain
from bihmap.homogeneity import LatticeSpec, deficit_table, fit_homogeneous, lattice, polar_rescale, rescale
from bihmap.oracle import cylindrical, geodesic_wrap, radial

C_K1 = 2 - 9 * np.pi / 16  # k = 1 deficit of x/|x| in m = 5


def test_deficit_constant_monte_carlo_oracle():
    # independent oracle: mean over B_1 of |z/|z| - z'/|z'||^2 with z' = z minus its e_5 part
    rng = np.random.default_rng(11)
    g = rng.standard_normal((400_000, 5))
    z = g / np.linalg.norm(g, axis=1, keepdims=True) * rng.uniform(size=(400_000, 1)) ** 0.2
    u = z / np.linalg.norm(z, axis=1, keepdims=True)
    w = z.copy()
    w[:, 4] = 0
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    mc = np.mean(np.sum((u - w) ** 2, axis=1))
    assert mc == pytest.approx(C_K1, abs=3e-3)


def test_lattice_weights_are_means():
    for k in (0, 1, 2):
        pts, w = lattice(5, k, np.eye(5), LatticeSpec.coarse())
        assert np.sum(w) == pytest.approx(1.0)
        assert np.all(np.linalg.norm(pts, axis=-1) <= 1.0 + 1e-12)
        # E|z|^2 over B_1 in R^5 is 5/7
        assert np.sum(w * np.sum(pts**2, axis=-1)) == pytest.approx(5 / 7, rel=0.02)


def test_radial_k0_deficit_vanishes(radial24):
    for r in (0.1, 0.2, 0.4):
        assert fit_homogeneous(radial24, np.zeros(5), r, 0).deficit <= 1e-3


def test_radial_k1_deficit_is_scale_invariant_constant(radial24):
    vals = [fit_homogeneous(radial24, np.zeros(5), r, 1).deficit for r in (0.1, 0.2, 0.4)]
    assert np.ptp(vals) / np.mean(vals) <= 0.05
    assert np.mean(vals) == pytest.approx(C_K1, rel=0.01)


def test_cylinder_k1_recovers_axis(dom24):
    f = cylindrical(5, 1).rasterize(dom24)
    fit = fit_homogeneous(f, np.zeros(5), 0.2, 1)
    assert fit.deficit <= 1e-3
    angle = np.degrees(np.arccos(min(1.0, abs(fit.plane[0] @ np.eye(5)[4]))))
    assert angle <= 5.0


def test_rescale_homogeneous(radial24):
    pts, w = lattice(5, 0, np.eye(5), LatticeSpec.coarse())
    a = rescale(radial24, np.zeros(5), 0.4, pts)
    b = rescale(radial24, np.zeros(5), 0.2, pts)
    # lattice mean of the pointwise gap; pointwise values near z = 0 are pure interpolation error
    dev = np.linalg.norm(a - b, axis=-1)
    assert np.sum(w * dev) <= 1e-3
    with pytest.raises(ValueError):
        polar_rescale(radial24, np.zeros(5), 0.5)


def test_deficit_table_nesting_and_determinism(radial24):
    spec = LatticeSpec.coarse()
    T = deficit_table(radial24, np.zeros(5), [0.2, 0.3], spec, budget=4)
    assert np.all(np.diff(T.deficits, axis=1) >= 0)
    assert np.all(T.deficits <= T.raw + 0.0)
    T2 = deficit_table(radial24, np.zeros(5), [0.2, 0.3], spec, budget=4)
    assert np.array_equal(T.deficits, T2.deficits)


def test_deficits_invariant_under_target_rotation(radial24):
    R = np.linalg.qr(np.random.default_rng(2).standard_normal((5, 5)))[0]
    spec = LatticeSpec.coarse()
    a = deficit_table(radial24, np.zeros(5), [0.2], spec, budget=1).deficits
    b = deficit_table(radial24.rotated(R), np.zeros(5), [0.2], spec, budget=1).deficits
    assert np.allclose(a, b, rtol=1e-9, atol=1e-12)


def test_smooth_point_deficit_decays(dom24):
    f = geodesic_wrap(5, 2.0).rasterize(dom24)
    spec = LatticeSpec.coarse()
    d_small = fit_homogeneous(f, np.zeros(5), 0.05, 5, spec).deficit
    d_large = fit_homogeneous(f, np.zeros(5), 0.4, 5, spec).deficit
    assert d_small < 0.1 * d_large


def test_k_range_validated(radial24):
    with pytest.raises(ValueError):
        fit_homogeneous(radial24, np.zeros(5), 0.2, 6)
    with pytest.raises(ValueError):
        deficit_table(radial24, np.zeros(5), [])
