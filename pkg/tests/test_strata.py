import numpy as np
import pytest

from bihmap.grid import GridDomain
from bihmap.homogeneity import LatticeSpec
from bihmap.oracle import radial
from bihmap.quadrature import ball_volume
from bihmap.strata import (Ball, Box, ScaleLadder, count_singular, decomposition_census, fail_scales, fit_slope,
                           grid_samples, qmc_samples, scale_sequence, stratum, tube_volume)

C_K1 = 2 - 9 * np.pi / 16
FAST = LatticeSpec(32, 4, 2, 2)


@pytest.mark.parametrize("kw", [dict(gamma=0.5), dict(gamma=0.0), dict(q=0), dict(beta_max=0), dict(unit=0.0)])
def test_ladder_validation(kw):
    with pytest.raises(ValueError):
        ScaleLadder(**kw)


def test_ladder_geometry():
    L = ScaleLadder(0.4, 2, 4, 0.5)
    assert L.radii() == pytest.approx([0.5 * 0.4**j for j in range(5)])
    for s, t in L.annulus_pairs(1):
        assert L.radius(3.5) - 1e-15 <= s <= L.radius(3) + 1e-15
        assert L.radius(1) - 1e-15 <= t <= L.radius(0.5) + 1e-15


def test_tube_volume_of_point_is_ball():
    v = tube_volume(np.zeros((1, 5)), 0.1, Ball(np.zeros(5), 1.0))
    assert v == pytest.approx(ball_volume(5, 0.1), rel=0.03)
    box = Box((-1,) * 3, (1,) * 3)
    seg = np.stack([np.linspace(-0.5, 0.5, 201), np.zeros(201), np.zeros(201)], axis=1)
    assert tube_volume(seg, 0.05, box) == pytest.approx(np.pi * 0.05**2 * 1.0 + 4 / 3 * np.pi * 0.05**3, rel=0.05)


def test_fit_slope_exact_power_law():
    r = np.geomspace(0.1, 1, 6)
    slope, _, rms = fit_slope(r, 3 * r**4.2)
    assert slope == pytest.approx(4.2) and rms < 1e-12


@pytest.fixture(scope="module")
def radial_fails(radial24, dom24):
    h = dom24.h
    S = grid_samples(dom24, np.zeros(5), 4 * h, stride=2)
    scales = [2 * h, 3 * h, 4 * h]
    return {k: fail_scales(radial24, k, 0.1 * C_K1, scales, S, FAST, 1) for k in (0, 1)}, scales


def test_strata_nesting(radial_fails):
    fails, scales = radial_fails
    for r in scales:
        assert not np.any(fails[0].members(r) & ~fails[1].members(r))
    for a, b in zip(scales, scales[1:]):
        assert not np.any(fails[0].members(a) & ~fails[0].members(b))


def test_point_stratum_localized(radial_fails):
    fails, scales = radial_fails
    for r in scales:
        m = fails[0].samples[fails[0].members(r)]
        assert len(m) > 0
        assert np.linalg.norm(m, axis=1).max() <= 2 * r


def test_stratum_wrapper_reuses_fails(radial24, radial_fails):
    fails, scales = radial_fails
    L = ScaleLadder(unit=0.3)
    atlas = stratum(radial24, 0, 0.1 * C_K1, scales[0], L, fails[0].samples, fails=fails[0])
    assert np.array_equal(atlas.member, fails[0].members(scales[0]))
    assert atlas.to_json()["members"] == int(atlas.member.sum())
    with pytest.raises(ValueError):
        stratum(radial24, 1, 0.1 * C_K1, scales[0], L, fails[0].samples, fails=fails[0])


def test_count_singular_radial():
    d = GridDomain(5, 16, 15 / 32)
    res = count_singular(radial(5).rasterize(d), 0.75 * d.h)
    assert res.count == 1
    # a corner of the cell containing the origin
    assert np.linalg.norm(res.representatives[0]) <= np.sqrt(5) * d.h / 2 + 1e-12


def test_scale_sequence_and_census(radial24, dom24):
    L = ScaleLadder(unit=0.3, beta_max=3)
    delta = 0.05 * 563.95  # 5% of the density bound at radius 0.3
    seq = scale_sequence(radial24, np.zeros(5), L, delta)
    assert seq.bits == (0, 0, 0) and seq.defined[0]
    c = decomposition_census(radial24, L, delta, qmc_samples(5, np.zeros(5), 0.05, 3, seed=0))
    assert c.within_bound() and len(c.classes) == 3


def test_samplers():
    d = GridDomain(5, 16, 1.0)
    S = grid_samples(d, np.zeros(5), 0.3)
    assert np.all(np.linalg.norm(S, axis=1) <= 0.3)
    Q = qmc_samples(5, np.ones(5) * 0.1, 0.2, 64, seed=3)
    assert Q.shape == (64, 5) and np.all(np.linalg.norm(Q - 0.1, axis=1) <= 0.2)
    assert np.array_equal(Q, qmc_samples(5, np.ones(5) * 0.1, 0.2, 64, seed=3))
