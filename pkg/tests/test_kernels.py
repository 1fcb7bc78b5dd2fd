import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hfsim.kernels import _ref

try:
    from hfsim.kernels import _fast
except ImportError:
    _fast = None

BACKENDS = [_ref] + ([_fast] if _fast else [])


@pytest.mark.parametrize("mod", BACKENDS)
def test_sample_exact_at_nodes(mod):
    rng = np.random.default_rng(0)
    values = rng.standard_normal((6, 5))
    coords = np.array([[i, j] for i in range(6) for j in range(5)], dtype=float)
    out = mod.sample_multilinear(values, coords)
    np.testing.assert_allclose(out, values.ravel(), atol=1e-14)


@pytest.mark.parametrize("mod", BACKENDS)
def test_sample_reproduces_linear(mod):
    # a bilinear interpolant is exact on affine data
    X, Y = np.meshgrid(np.arange(9.0), np.arange(7.0), indexing="ij")
    values = 2.0 * X - 0.5 * Y + 3.0
    rng = np.random.default_rng(1)
    coords = rng.uniform([0, 0], [8, 6], size=(200, 2))
    out = mod.sample_multilinear(values, coords)
    expect = 2.0 * coords[:, 0] - 0.5 * coords[:, 1] + 3.0
    np.testing.assert_allclose(out, expect, atol=1e-12)


@pytest.mark.parametrize("mod", BACKENDS)
def test_sample_clamps_outside(mod):
    values = np.arange(12.0).reshape(4, 3)
    out = mod.sample_multilinear(values, np.array([[-5.0, 1.0], [10.0, 1.0]]))
    assert out[0] == values[0, 1]
    assert out[1] == values[3, 1]


@pytest.mark.skipif(_fast is None, reason="compiled kernels not built")
@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=25, deadline=None)
def test_backends_agree_sampling(seed):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((8, 8))
    coords = rng.uniform(-1, 8, size=(50, 2))
    a = _ref.sample_multilinear(values, coords)
    b = _fast.sample_multilinear(values, coords)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)


@pytest.mark.skipif(_fast is None, reason="compiled kernels not built")
@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=15, deadline=None)
def test_backends_agree_reinit(seed):
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal((12, 12))
    pos = phi > 0
    dtau_s = 0.05 * np.sign(phi)
    update = np.abs(phi) < 1.5
    a = _ref.reinit_godunov(phi, pos, dtau_s, 0.1, update)
    b = _fast.reinit_godunov(phi, pos, dtau_s, 0.1, update)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)


@pytest.mark.parametrize("mod", BACKENDS)
def test_reinit_leaves_masked_cells(mod):
    rng = np.random.default_rng(3)
    phi = rng.standard_normal((10, 10))
    update = np.zeros((10, 10), dtype=bool)
    update[4:6, 4:6] = True
    out = mod.reinit_godunov(phi, phi > 0, 0.05 * np.sign(phi), 0.1, update)
    np.testing.assert_array_equal(out[~update], phi[~update])


@pytest.mark.parametrize("mod", BACKENDS)
def test_reinit_fixed_point_on_signed_distance(mod):
    # an exact signed-distance field has |grad phi| = 1, so the update is zero
    X, Y = np.meshgrid(np.arange(20.0), np.arange(20.0), indexing="ij")
    phi = (X - 9.5) * 0.1  # planar distance field, dx = 0.1
    update = np.ones(phi.shape, dtype=bool)
    update[0, :] = update[-1, :] = False  # one-sided stencils at the walls
    out = mod.reinit_godunov(phi, phi > 0, 0.05 * np.sign(phi), 0.1, update)
    np.testing.assert_allclose(out, phi, atol=1e-12)
