import warnings

import numpy as np
import pytest

from hfsim.grid import GridDesc
from hfsim.regions import (FEM_BAND, FVM_MOVING, FVM_STATIC, HybridLayout,
                           MovingRegion, RegionError, RegionFrozenWarning,
                           check_regions, label_cells, update_region_position)


@pytest.fixture
def desc():
    return GridDesc(2, (32, 32), 1.0 / 32, (0.0, 0.0))


def region(lo=(8, 8), hi=(16, 16), **kw):
    return MovingRegion(lo=lo, hi=hi, axis_mask=(True, True), **kw)


def test_region_validation(desc):
    region().validate(desc)
    with pytest.raises(RegionError):
        region(lo=(8, 8), hi=(10, 16)).validate(desc)   # too thin
    with pytest.raises(RegionError):
        region(lo=(0, 8), hi=(8, 16)).validate(desc)    # no boundary margin
    with pytest.raises(RegionError):
        region(offset=(0.5, 0.0)).validate(desc)        # offset >= dx
    with pytest.raises(RegionError):
        MovingRegion(lo=(8, 8), hi=(16, 16), axis_mask=(True, False),
                     offset=(0.0, 0.01))                # offset on locked axis


def test_overlap_rejected(desc):
    a = region(lo=(4, 4), hi=(12, 12))
    b = region(lo=(13, 4), hi=(21, 12))  # windows disjoint but halos touch
    with pytest.raises(RegionError):
        check_regions(desc, [a, b])
    c = region(lo=(18, 18), hi=(26, 26))
    check_regions(desc, [a, c])


def test_labels(desc):
    layout = label_cells(desc, [region()])
    lab = layout.labels
    assert lab[12, 12] == FVM_MOVING
    assert lab[8, 12] == FEM_BAND    # window boundary ring
    assert lab[7, 12] == FEM_BAND    # adjacent background ring
    assert lab[6, 12] == FVM_STATIC
    assert lab[0, 0] == FVM_STATIC


def test_face_classes(desc):
    layout = label_cells(desc, [region()])
    cls = layout.face_classes()[0]
    assert cls[12, 12] == HybridLayout.FACE_MOVING
    assert cls[8, 12] == HybridLayout.FACE_SEAM   # between cells 7 and 8
    assert cls[16, 12] == HybridLayout.FACE_SEAM
    assert cls[4, 12] == HybridLayout.FACE_STATIC


def test_positions_apply_offsets(desc):
    dx = desc.dx
    off = (0.4 * dx, 0.1 * dx)
    layout = label_cells(desc, [region(offset=off)])
    cp = layout.cell_positions()
    assert np.allclose(cp[12, 12], desc.cell_center((12, 12)) + off)
    assert np.allclose(cp[2, 2], desc.cell_center((2, 2)))
    fp = layout.face_positions(0)
    # seam face sits halfway between the static and displaced lattices
    assert np.allclose(fp[8, 12], desc.face_center(0, (8, 12)) + np.array(off) / 2)
    assert np.allclose(fp[12, 12], desc.face_center(0, (12, 12)) + off)
    assert np.allclose(fp[3, 3], desc.face_center(0, (3, 3)))


def test_update_position_wraps_offset(desc):
    dx = desc.dx
    reg = region(offset=(0.75 * dx, 0.0), u_g=(dx / 0.02, 0.0))  # +0.5 dx per step
    new = reg
    new = update_region_position(new, 0.01, desc)
    # 0.75 dx + 0.5 dx = 1.25 dx -> one-cell shift, offset 0.25 dx
    assert np.allclose(new.offset, (0.25 * dx, 0.0))
    assert tuple(new.lo) == (9, 8) and tuple(new.hi) == (17, 16)


def test_update_position_freezes_at_margin(desc):
    reg = region(lo=(22, 8), hi=(30, 16), u_g=(100.0, 0.0))
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        new = update_region_position(reg, 0.01, desc)
    assert any(issubclass(w.category, RegionFrozenWarning) for w in rec)
    assert new.frozen
    assert np.all(new.u_g == 0)
    # frozen regions no longer move
    again = update_region_position(new, 0.01, desc)
    assert tuple(again.lo) == tuple(new.lo)


def test_update_position_refill_callback(desc):
    dx = desc.dx
    reg = region(u_g=(0.3 * dx / 0.01, 0.0))
    calls = {}

    def refill_cell(idx, pos):
        calls["idx"] = idx
        calls["pos"] = pos

    new = update_region_position(reg, 0.01, desc, refill_cell=refill_cell)
    assert np.allclose(new.offset, (0.3 * dx, 0.0))
    # positions handed to the callback are the post-update interpreted ones
    k = np.flatnonzero(np.all(calls["idx"] == (12, 12), axis=1))[0]
    assert np.allclose(calls["pos"][k], desc.cell_center((12, 12)) + new.offset)


def test_update_rejects_bad_velocity(desc):
    reg = region(u_g=(np.nan, 0.0))
    with pytest.raises(RegionError):
        update_region_position(reg, 0.01, desc)
