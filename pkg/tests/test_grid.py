import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bihmap.grid import FieldFormatError, GridDomain, SphereField, load_field, normalize, sample, save_field
from bihmap.oracle import geodesic_wrap, radial


def test_domain_geometry():
    d = GridDomain(3, 9, 1.0)
    assert d.h == pytest.approx(0.25)
    assert d.shape == (9, 9, 9)
    assert np.allclose(d.axis(0)[[0, -1]], [-1, 1])
    assert d.contains_ball(np.zeros(3), 1.0)
    assert not d.contains_ball(np.zeros(3), 1.01)
    assert GridDomain.with_spacing(2, 9, 0.1).h == pytest.approx(0.1)


@pytest.mark.parametrize("bad", [dict(dim=1, nodes_per_axis=8, half_width=1.0),
                                 dict(dim=3, nodes_per_axis=2, half_width=1.0),
                                 dict(dim=3, nodes_per_axis=8, half_width=0.0)])
def test_domain_rejects_bad_parameters(bad):
    with pytest.raises(FieldFormatError):
        GridDomain(**bad)


def test_collar_mask_counts():
    d = GridDomain(2, 10, 1.0)
    assert d.collar_mask(2).sum() == 6 * 6


def test_save_load_round_trip_is_bitwise(tmp_path):
    f = radial(3).rasterize(GridDomain(3, 8, 0.7, (0.1, 0.0, -0.2)))
    p = tmp_path / "f.bhf"
    save_field(f, p)
    g = load_field(p)
    assert g.domain == f.domain
    assert np.array_equal(g.values, f.values)


def test_load_rejects_malformed(tmp_path):
    f = radial(3).rasterize(GridDomain(3, 8, 1.0))
    p = tmp_path / "f.bhf"
    save_field(f, p)
    raw = p.read_bytes()
    (tmp_path / "short.bhf").write_bytes(raw[:-8])
    (tmp_path / "magic.bhf").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(FieldFormatError):
        load_field(tmp_path / "short.bhf")
    with pytest.raises(FieldFormatError):
        load_field(tmp_path / "magic.bhf")
    off = SphereField.__new__(SphereField)
    vals = f.values.copy()
    vals[0, 0, 0] *= 1.5
    object.__setattr__(off, "domain", f.domain)
    object.__setattr__(off, "values", vals)
    save_field(off, tmp_path / "off.bhf")
    with pytest.raises(FieldFormatError):
        load_field(tmp_path / "off.bhf")


def test_sample_exact_at_nodes_and_linear_between():
    d = GridDomain(2, 9, 1.0)
    f = geodesic_wrap(2, 0.5).rasterize(d)
    idx = (3, 5)
    assert np.allclose(sample(f, d.node_coords(np.array(idx))), f.values[idx])
    x = 0.5 * (d.node_coords(np.array([3, 5])) + d.node_coords(np.array([4, 5])))
    assert np.allclose(sample(f, x), 0.5 * (f.values[3, 5] + f.values[4, 5]))
    with pytest.raises(ValueError):
        sample(f, np.array([2.0, 0.0]))


def test_sample_renorm_matches_exact_map():
    # m = 2, h ~ 1/32, x = (0.5, 0.5): interpolation error of a smooth map is O(h^2)
    o = radial(2)
    d = GridDomain(2, 64, 1.0)
    f = o.rasterize(d)
    x = np.array([0.5, 0.5])
    assert np.linalg.norm(sample(f, x, renorm=True) - o.evaluate(x)) < 1e-3


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_normalize_unit_or_fallback(v):
    u = normalize(np.array(v))
    assert np.linalg.norm(u) == pytest.approx(1.0)


def test_rotated_is_target_rotation():
    f = radial(3).rasterize(GridDomain(3, 8, 1.0))
    R = np.linalg.qr(np.random.default_rng(1).standard_normal((3, 3)))[0]
    g = f.rotated(R)
    assert np.allclose(g.values, f.values @ R.T)
