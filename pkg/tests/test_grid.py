import numpy as np
import pytest

from hfsim.grid import (GridDesc, ScalarField, StaggeredVelocityField,
                        read_field_dump, write_field_dump)


@pytest.fixture
def desc():
    return GridDesc(2, (8, 6), 0.25, (1.0, -2.0))


def test_cell_center_convention(desc):
    assert np.allclose(desc.cell_center((0, 0)), [1.125, -1.875])
    assert np.allclose(desc.cell_center((7, 5)), [1.0 + 7.5 * 0.25, -2.0 + 5.5 * 0.25])
    centers = desc.cell_centers()
    assert centers.shape == (8, 6, 2)
    assert np.allclose(centers[3, 2], desc.cell_center((3, 2)))


def test_face_centers_staggering(desc):
    fx = desc.face_centers(0)
    assert fx.shape == (9, 6, 2)
    # axis-0 face (i,j) separates cells (i-1,j) and (i,j)
    assert np.allclose(fx[3, 2], [1.0 + 3 * 0.25, -2.0 + 2.5 * 0.25])
    fy = desc.face_centers(1)
    assert fy.shape == (8, 7, 2)
    assert np.allclose(fy[3, 2], [1.0 + 3.5 * 0.25, -2.0 + 2 * 0.25])


def test_desc_validation():
    with pytest.raises(ValueError):
        GridDesc(4, (4, 4, 4, 4), 1.0, (0, 0, 0, 0))
    with pytest.raises(ValueError):
        GridDesc(2, (2, 8), 1.0, (0, 0))
    with pytest.raises(ValueError):
        GridDesc(2, (8, 8), -1.0, (0, 0))
    with pytest.raises(ValueError):
        GridDesc(2, (8, 8), 1.0, (0, 0, 0))


def test_scalar_field_shape_check(desc):
    with pytest.raises(ValueError):
        ScalarField(desc, np.zeros((8, 7)))
    f = ScalarField.from_function(desc, lambda p: p[..., 0] + p[..., 1])
    assert f.values.shape == desc.shape
    assert np.isclose(f.values[0, 0], sum(desc.cell_center((0, 0))))


def test_velocity_field_shapes(desc):
    u = StaggeredVelocityField.zeros(desc)
    assert u.comps[0].shape == (9, 6)
    assert u.comps[1].shape == (8, 7)
    with pytest.raises(ValueError):
        StaggeredVelocityField(desc, [np.zeros((8, 6)), np.zeros((8, 7))])
    u.comps[0][:] = -3.0
    assert u.max_speed_component() == 3.0


def test_dump_roundtrip(tmp_path, desc):
    rng = np.random.default_rng(7)
    vals = rng.standard_normal(desc.shape)
    path = tmp_path / "f.dump"
    write_field_dump(path, desc, vals, "cell")
    meta, back = read_field_dump(path)
    assert meta["dx"] == desc.dx
    assert meta["origin"] == desc.origin
    np.testing.assert_array_equal(back, vals)

    fvals = rng.standard_normal(desc.face_shape(1))
    write_field_dump(path, desc, fvals, "faceY")
    _, back = read_field_dump(path)
    np.testing.assert_array_equal(back, fvals)


def test_dump_rejects_bad_kind(tmp_path, desc):
    with pytest.raises(ValueError):
        write_field_dump(tmp_path / "f.dump", desc, np.zeros(desc.shape), "faceZ")
    with pytest.raises(ValueError):
        write_field_dump(tmp_path / "f.dump", desc, np.zeros((3, 3)), "cell")


def test_dump_bitwise_stable(tmp_path, desc):
    vals = np.linspace(0, 1, desc.num_cells).reshape(desc.shape)
    p1, p2 = tmp_path / "a.dump", tmp_path / "b.dump"
    write_field_dump(p1, desc, vals, "cell")
    write_field_dump(p2, desc, vals.copy(), "cell")
    assert p1.read_bytes() == p2.read_bytes()
