import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bihmap.grid import GridDomain
from bihmap.oracle import (SingularLocusError, bump, constant, cylindrical, exact_energy, exact_theta,
                           geodesic_wrap, planted_multi, radial)
from bihmap.quadrature import sphere_area

THETA_X_OVER_ABS_X = 64 * np.pi**2  # m = 5
ENERGY_B1 = 128 * np.pi**2 / 3  # int_{B_1} |Delta f|^2, m = 5


def test_radial_frozen_values():
    o = radial(5)
    x = 0.5 * np.array([0.6, 0.0, 0.8, 0.0, 0.0])
    J = o.exact_jet(x, 2)
    assert J.norm(1) ** 2 == pytest.approx(16.0, rel=1e-12)
    assert np.sum(J.laplacian**2) == pytest.approx(256.0, rel=1e-12)


def test_exact_jets_match_finite_differences():
    o = radial(5)
    x = np.array([0.31, -0.2, 0.12, 0.05, -0.17])
    J = o.exact_jet(x, 1)
    eps = 1e-5
    fd = np.stack([(o.evaluate(x + eps * e) - o.evaluate(x - eps * e)) / (2 * eps) for e in np.eye(5)])
    assert np.allclose(J.tensors[0], fd, atol=1e-8)


def test_theta_oracle_value_and_r_independence():
    vals = [exact_theta(radial(5), np.zeros(5), r) for r in (0.05, 0.2, 0.3, 0.4, 1.0)]
    assert vals[0] == pytest.approx(THETA_X_OVER_ABS_X, rel=1e-12)
    assert np.ptp(vals) / THETA_X_OVER_ABS_X < 1e-10


def test_energy_oracle():
    assert exact_energy(radial(5), 1.0) == pytest.approx(ENERGY_B1, rel=1e-12)
    assert exact_energy(geodesic_wrap(3, 2.0), 1.0) == pytest.approx(16 * sphere_area(3) / 3, rel=1e-12)


def test_theta_oracle_independent_quadrature():
    # Theta = (m-1)^2 omega/(m-4) + 2 (m-1) omega by direct polar integration
    from scipy import integrate

    om = sphere_area(5)
    bulk, _ = integrate.quad(lambda t: 16 / t**4 * t**4, 0, 0.3)
    th = 0.3 ** (-1) * om * bulk + 0.3 ** (-2) * 8 / 0.3**2 * om * 0.3**4
    assert exact_theta(radial(5), np.zeros(5), 0.3) == pytest.approx(th, rel=1e-12)


def test_singular_locus_raises():
    with pytest.raises(SingularLocusError):
        radial(3).evaluate(np.zeros(3))
    with pytest.raises(SingularLocusError):
        cylindrical(4, 1).evaluate(np.array([0, 0, 0, 0.3]))


def test_constructor_validation():
    with pytest.raises(ValueError):
        cylindrical(4, 3)
    with pytest.raises(ValueError):
        constant(3, (1.0, 1.0))
    with pytest.raises(ValueError):
        planted_multi(3, [(0, 0, 0), (0.1, 0, 0)], 0.1)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-0.9, 0.9), min_size=5, max_size=5))
def test_values_are_unit(v):
    x = np.array(v)
    for o in (radial(5), cylindrical(5, 1), geodesic_wrap(5, 1.3), planted_multi(5, [(0,) * 5], 0.3)):
        if o.singular_distance(x) > 1e-6:
            assert np.linalg.norm(o.evaluate(x)) == pytest.approx(1.0, abs=1e-14)


def test_bump_is_one_only_at_center_and_c4():
    assert bump(0.0, 0.2) == 1.0
    assert bump(0.2, 0.2) == 0.0
    r = np.linspace(0.0, 0.2, 50)[1:]
    assert np.all(bump(r, 0.2) < 1.0)


def test_planted_multi_smooth_outside_centers():
    o = planted_multi(5, [(-0.15, -0.1, 0, 0, 0), (0.15, -0.1, 0, 0, 0), (0, 0.15, 0, 0, 0)], 0.14)
    far = np.array([0.4, 0.4, 0, 0, 0])
    assert np.allclose(o.evaluate(far), np.eye(6)[5])
    near = np.array([0.15 + 1e-3, -0.1, 0, 0, 0])
    assert o.exact_jet(near, 1).norm(1) > 100 * o.exact_jet(np.array([0.0, 0.0, 0.0, 0.3, 0.0]), 1).norm(1)


def test_rasterize_offset_grid_avoids_origin():
    f = radial(5).rasterize(GridDomain(5, 8, 0.4))
    assert np.allclose(np.linalg.norm(f.values, axis=-1), 1.0)
