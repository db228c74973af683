import numpy as np
import pytest

from bihmap.grid import GridDomain
from bihmap.monotonicity import DensityEvaluator, density_profile, lambda_bound, monotone_diff, theta
from bihmap.oracle import exact_theta, geodesic_wrap, radial

THETA = 64 * np.pi**2


@pytest.fixture(scope="module")
def center_eval(radial24):
    return DensityEvaluator(radial24, np.zeros(5), 0.4)


def test_wrap_theta_matches_oracle(dom24):
    o = geodesic_wrap(5, 1.5)
    f = o.rasterize(dom24)
    assert theta(f, np.zeros(5), 0.3) == pytest.approx(exact_theta(o, np.zeros(5), 0.3), rel=0.03)


def test_radial_error_halves_with_resolution(center_eval):
    # x/|x| rasterized on a cell-centered grid is self-similar: Theta at (h/2, r) equals Theta at (h, 2r)
    e_coarse = abs(center_eval.theta(0.2) / THETA - 1)
    e_fine = abs(center_eval.theta(0.4) / THETA - 1)
    assert 0.5 * 0.7 <= e_fine / e_coarse <= 0.5 * 1.3


def test_radial_profile_nearly_constant(center_eval):
    th = [center_eval.theta(r) for r in (0.2, 0.25, 0.3, 0.35, 0.4)]
    assert np.ptp(th) / np.mean(th) < 0.1
    assert np.all(np.diff(th) >= 0)


def test_radial_annulus_route_vanishes(center_eval):
    # the annulus integrand is |d_X f|^2-type and vanishes for a 0-homogeneous map
    lam = center_eval.theta(0.4)
    for s, t in [(0.2, 0.25), (0.25, 0.3), (0.3, 0.4)]:
        assert abs(center_eval.annulus(s, t)[0]) <= 0.02 * lam


def test_radial_theta_route_vanishes(center_eval):
    # theta(t) - theta(s) ~ 0 up to 0.02 Lambda; the quadrature error of theta varies with r
    lam = center_eval.theta(0.4)
    for s, t in [(0.2, 0.25), (0.25, 0.3), (0.3, 0.4)]:
        w = center_eval.monotone_diff(s, t).w_theta
        assert abs(w) <= 0.02 * lam, (s, t, w, 0.02 * lam)


def test_annulus_cutoff_and_radius_guards(radial24, dom24):
    ev = DensityEvaluator(radial24, np.zeros(5), 0.2, annulus=True)
    _, cut = ev.annulus(0.05, 0.2)
    assert cut == pytest.approx(2 * dom24.h)
    with pytest.raises(ValueError):
        ev.theta(3 * dom24.h)
    with pytest.raises(ValueError):
        ev.theta(0.3)
    with pytest.raises(ValueError):
        theta(radial24, np.zeros(5), 0.45)
    with pytest.raises(ValueError):
        monotone_diff(radial24, np.zeros(5), 0.2, 0.2)


def test_profile_validation_and_bound(radial24):
    with pytest.raises(ValueError):
        density_profile(radial24, np.zeros(5), [0.3, 0.2])
    with pytest.raises(ValueError):
        density_profile(radial24, np.zeros(5), [])
    p = density_profile(radial24, np.zeros(5), [0.17, 0.2], lambda_bound=1e4)
    assert p.within_bound and p.tolerance == pytest.approx(100.0)


def test_theta_smaller_off_singularity(radial24):
    x = np.array([0.2, 0.0, 0.0, 0.0, 0.0])
    assert theta(radial24, x, 0.17) < 0.5 * theta(radial24, np.zeros(5), 0.17)


def test_theta_rotation_invariant(radial24):
    R = np.linalg.qr(np.random.default_rng(5).standard_normal((5, 5)))[0]
    a = theta(radial24, np.zeros(5), 0.2)
    b = theta(radial24.rotated(R), np.zeros(5), 0.2)
    assert b == pytest.approx(a, rel=1e-10)


def test_lambda_bound_is_max(radial24):
    c = [np.zeros(5), np.array([0.1, 0, 0, 0, 0])]
    lb = lambda_bound(radial24, c, 0.17)
    assert lb == pytest.approx(max(theta(radial24, x, 0.17) for x in c))
