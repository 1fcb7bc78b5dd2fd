import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hfsim.elements import (Element, MeshError, build_seam_elements,
                            gauss_points, node_bits, rebuild_hybrid,
                            shape_gradients, shape_values)
from hfsim.grid import GridDesc, ScalarField
from hfsim.regions import MovingRegion


def unit_quad(dx=1.0):
    return np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float) * dx


def make_element(node_pos):
    return Element(np.zeros((4, 2), dtype=int), np.zeros(4, dtype=bool),
                   node_pos, -np.ones(4), 0)


def stiffness(el):
    return np.einsum("q,qai,qaj->ij", el.qp_w * el.qp_detJ, el.qp_B, el.qp_B)


def dense_stiffness(node_pos, npts=16):
    """Independent oracle: tensor Gauss-Legendre quadrature with npts points."""
    g, w = np.polynomial.legendre.leggauss(int(round(np.sqrt(npts))))
    XI, ETA = np.meshgrid(g, g, indexing="ij")
    xi = np.stack([XI.ravel(), ETA.ravel()], axis=-1)
    W = np.outer(w, w).ravel()
    grads = shape_gradients(xi, 2)
    jac = grads @ node_pos
    B = np.linalg.solve(jac, grads)
    return np.einsum("q,qai,qaj->ij", W * np.linalg.det(jac), B, B)


def test_shape_functions_partition_of_unity():
    xi = np.random.default_rng(0).uniform(-1, 1, size=(50, 2))
    N = shape_values(xi, 2)
    np.testing.assert_allclose(N.sum(axis=-1), 1.0, atol=1e-14)
    assert np.all(N >= 0)
    G = shape_gradients(xi, 2)
    np.testing.assert_allclose(G.sum(axis=-1), 0.0, atol=1e-14)


def test_shape_functions_nodal():
    bits = node_bits(2)
    corners = np.where(bits == 1, 1.0, -1.0)
    N = shape_values(corners, 2)
    np.testing.assert_allclose(N, np.eye(4), atol=1e-14)


@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
@settings(max_examples=50, deadline=None)
def test_shape_gradients_match_fd(x, y):
    xi = np.array([x, y])
    h = 1e-6
    G = shape_gradients(xi, 2)
    for a in range(2):
        e = np.zeros(2)
        e[a] = h
        fd = (shape_values(xi + e, 2) - shape_values(xi - e, 2)) / (2 * h)
        np.testing.assert_allclose(G[a], fd, atol=1e-8)


def test_gauss_points():
    pts, w = gauss_points(2)
    assert pts.shape == (4, 2)
    np.testing.assert_allclose(np.abs(pts), 1 / np.sqrt(3))
    np.testing.assert_allclose(w, 1.0)


def test_undeformed_stiffness_analytic():
    K = stiffness(make_element(unit_quad()))
    # the bilinear Laplacian element matrix: diagonal 2/3, edge-neighbor -1/6,
    # diagonal-neighbor -1/3 (scale invariant in 2D)
    expect = np.array([[4, -1, -1, -2], [-1, 4, -2, -1],
                       [-1, -2, 4, -1], [-2, -1, -1, 4]]) / 6.0
    np.testing.assert_allclose(K, expect, atol=1e-13)
    # scale invariance
    np.testing.assert_allclose(stiffness(make_element(unit_quad(1 / 64))),
                               expect, atol=1e-13)


def test_deformed_stiffness_dense_quadrature():
    dx = 1.0 / 64
    pos = unit_quad(dx)
    pos[[1, 3]] += np.array([0.4, 0.27]) * dx  # side shifted by one offset
    K = stiffness(make_element(pos))
    np.testing.assert_allclose(K, dense_stiffness(pos), atol=1e-12)
    np.testing.assert_allclose(K.sum(axis=1), 0.0, atol=1e-12)


def test_degenerate_element_rejected():
    pos = unit_quad()
    pos[3] = pos[0]  # collapse a corner
    with pytest.raises(MeshError):
        make_element(pos)


def layout_with_region(n=32, offset=(0.0, 0.0), phi_value=-1.0):
    desc = GridDesc(2, (n, n), 1.0 / n, (0.0, 0.0))
    reg = MovingRegion(lo=(8, 8), hi=(16, 16), axis_mask=(True, True),
                       offset=np.array(offset) * desc.dx)
    phi = ScalarField(desc, np.full(desc.shape, phi_value))
    return rebuild_hybrid(desc, [reg], phi), desc


def test_seam_elements_mix_lattices():
    layout, desc = layout_with_region(offset=(0.3, 0.7))
    assert layout.elements
    for el in layout.elements:
        assert el.node_moving.any() and not el.node_moving.all()
        assert el.volume > 0
        # moving nodes are displaced by the offset, static ones are not
        for k in range(4):
            lattice = desc.cell_center(el.node_cells[k])
            shift = el.node_pos[k] - lattice
            if el.node_moving[k]:
                np.testing.assert_allclose(shift, layout.regions[0].offset)
            else:
                np.testing.assert_allclose(shift, 0.0, atol=1e-15)


def test_all_air_elements_dropped():
    layout, _ = layout_with_region(phi_value=1.0)
    assert layout.elements == []


@pytest.mark.parametrize("offset", [(0.0, 0.0), (0.3, 0.77), (0.5, 0.5),
                                    (0.999, 0.001)])
def test_total_area_conserved(offset):
    # control volumes plus element volumes must tile the domain exactly
    layout, desc = layout_with_region(offset=offset)
    total = layout.control_volume.sum() + sum(el.volume for el in layout.elements)
    domain = np.prod([desc.shape[a] * desc.dx for a in range(2)])
    assert abs(total - domain) < 1e-12


def test_seam_faces_have_zero_aperture():
    layout, desc = layout_with_region(offset=(0.4, 0.2))
    cls = layout.face_classes()
    for a in range(2):
        seam = cls[a] == layout.FACE_SEAM
        assert seam.any()
        np.testing.assert_array_equal(layout.face_aperture[a][seam], 0.0)
        # far-field faces keep the full length
        assert layout.face_aperture[a][2, 2] == desc.dx


def test_locator_covers_elements():
    layout, desc = layout_with_region(offset=(0.6, 0.6))
    for eid, el in enumerate(layout.elements):
        key = tuple(np.floor((el.center - desc.origin) / desc.dx).astype(int))
        assert eid in layout.elem_locator[key]
