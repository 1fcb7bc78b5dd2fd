"""Moving-grid windows and hybrid cell labeling.

A MovingRegion is an axis-aligned window of background cells whose lattice is
displaced by a continuous offset in [0,dx) per allowed axis.  Cells strictly
inside the window stay finite-volume on the displaced lattice; the window
boundary ring plus the adjacent background ring host the finite-element seam.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import GridDesc, ScalarField, StaggeredVelocityField

FVM_STATIC = 0
FVM_MOVING = 1
FEM_BAND = 2

MARGIN = 2  # cells between window and domain boundary


class RegionError(ValueError):
    pass


class RegionFrozenWarning(UserWarning):
    pass


@dataclass
class MovingRegion:
    lo: np.ndarray            # inclusive cell index per axis
    hi: np.ndarray            # exclusive cell index per axis
    axis_mask: tuple[bool, ...]
    offset: np.ndarray = None  # world displacement, [0, dx) per masked axis
    u_g: np.ndarray = None     # grid velocity
    frozen: bool = False

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.intp)
        self.hi = np.asarray(self.hi, dtype=np.intp)
        dim = len(self.lo)
        self.axis_mask = tuple(bool(m) for m in self.axis_mask)
        if self.offset is None:
            self.offset = np.zeros(dim)
        if self.u_g is None:
            self.u_g = np.zeros(dim)
        self.offset = np.asarray(self.offset, dtype=float).copy()
        self.u_g = np.asarray(self.u_g, dtype=float).copy()
        for a, m in enumerate(self.axis_mask):
            if not m and self.offset[a] != 0.0:
                raise RegionError(f"offset on locked axis {a} must be 0")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def validate(self, desc: GridDesc) -> None:
        if self.dim != desc.dim or len(self.axis_mask) != desc.dim:
            raise RegionError("region dimensionality mismatch")
        for a in range(desc.dim):
            if self.hi[a] - self.lo[a] < 3:
                raise RegionError("window needs at least 3 cells per axis")
            if self.lo[a] < MARGIN or self.hi[a] > desc.shape[a] - MARGIN:
                raise RegionError(
                    f"window [{self.lo[a]},{self.hi[a]}) leaves less than "
                    f"{MARGIN} cells of margin on axis {a}")
            if not 0.0 <= self.offset[a] < desc.dx:
                raise RegionError(f"offset[{a}]={self.offset[a]} outside [0,dx)")

    def contains_cell(self, idx) -> bool:
        idx = np.asarray(idx)
        return bool(np.all(idx >= self.lo) and np.all(idx < self.hi))

    def cell_mask(self, desc: GridDesc, pad: int = 0) -> np.ndarray:
        mask = np.zeros(desc.shape, dtype=bool)
        sl = tuple(slice(int(self.lo[a] - pad), int(self.hi[a] + pad))
                   for a in range(desc.dim))
        mask[sl] = True
        return mask

    def copy(self) -> "MovingRegion":
        return MovingRegion(self.lo.copy(), self.hi.copy(), self.axis_mask,
                            self.offset.copy(), self.u_g.copy(), self.frozen)


def check_regions(desc: GridDesc, regions) -> None:
    for r in regions:
        r.validate(desc)
    for i, a in enumerate(regions):
        for b in regions[i + 1:]:
            # overlap including the one-cell seam halo around each window
            if all(a.lo[d] - 2 < b.hi[d] + 1 and b.lo[d] - 2 < a.hi[d] + 1
                   for d in range(desc.dim)):
                raise RegionError("moving regions overlap (including seam halo)")


@dataclass
class HybridLayout:
    desc: GridDesc
    regions: list
    labels: np.ndarray                 # int8 per cell
    control_volume: np.ndarray = None  # world volume per cell, filled by mesh step
    face_aperture: list = None         # per-axis free face length, filled by mesh step
    elements: list = field(default_factory=list)
    elem_locator: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.control_volume is None:
            self.control_volume = np.full(self.desc.shape,
                                          self.desc.dx ** self.desc.dim)
        if self.face_aperture is None:
            self.face_aperture = [
                np.full(self.desc.face_shape(a), self.desc.dx ** (self.desc.dim - 1))
                for a in range(self.desc.dim)]
        self._face_classes = None

    FACE_STATIC = 0
    FACE_MOVING = 1
    FACE_SEAM = 2

    def face_classes(self) -> list[np.ndarray]:
        """Per-axis face classification from window membership of the two
        adjacent cells: both inside -> moving, both outside -> static,
        mixed -> seam (position halfway between the displaced lattices)."""
        if self._face_classes is None:
            desc = self.desc
            win = self.moving_cell_mask()
            out = []
            for a in range(desc.dim):
                pad = np.concatenate([np.take(win, [0], axis=a) & False, win,
                                      np.take(win, [-1], axis=a) & False], axis=a)
                n = pad.shape[a]
                left = np.take(pad, range(0, n - 1), axis=a)
                right = np.take(pad, range(1, n), axis=a)
                cls = np.where(left & right, self.FACE_MOVING,
                               np.where(left | right, self.FACE_SEAM,
                                        self.FACE_STATIC)).astype(np.int8)
                out.append(cls)
            self._face_classes = out
        return self._face_classes

    def face_positions(self, axis: int) -> np.ndarray:
        """World positions of every axis-face center, seam/moving shifts applied."""
        pos = self.desc.face_centers(axis).astype(float)
        cls = self.face_classes()[axis]
        for reg in self.regions:
            sl = tuple(slice(max(int(reg.lo[b]) - 1, 0),
                             int(reg.hi[b]) + 1 + (1 if b == axis else 0))
                       for b in range(self.desc.dim))
            local = cls[sl]
            shift = np.zeros(local.shape + (self.desc.dim,))
            shift[local == self.FACE_MOVING] = reg.offset
            shift[local == self.FACE_SEAM] = reg.offset / 2.0
            pos[sl] = pos[sl] + shift
        return pos

    def cell_positions(self) -> np.ndarray:
        """World positions of every cell center, window offsets applied."""
        pos = self.desc.cell_centers().astype(float)
        for reg in self.regions:
            sl = tuple(slice(int(reg.lo[b]), int(reg.hi[b]))
                       for b in range(self.desc.dim))
            pos[sl] = pos[sl] + reg.offset
        return pos

    @property
    def has_moving(self) -> bool:
        return len(self.regions) > 0

    def moving_cell_mask(self) -> np.ndarray:
        """All cells on a displaced lattice (whole window, boundary included)."""
        mask = np.zeros(self.desc.shape, dtype=bool)
        for r in self.regions:
            mask |= r.cell_mask(self.desc)
        return mask


def label_cells(desc: GridDesc, regions) -> HybridLayout:
    """Labels: window interior FVM_MOVING, window boundary ring plus adjacent
    background ring FEM_BAND, everything else FVM_STATIC."""
    check_regions(desc, regions)
    labels = np.full(desc.shape, FVM_STATIC, dtype=np.int8)
    for r in regions:
        outer = r.cell_mask(desc, pad=1)
        inner = np.zeros(desc.shape, dtype=bool)
        sl = tuple(slice(int(r.lo[a] + 1), int(r.hi[a] - 1)) for a in range(desc.dim))
        inner[sl] = True
        labels[outer] = FEM_BAND
        labels[inner] = FVM_MOVING
    return HybridLayout(desc, [r.copy() for r in regions], labels)


def update_region_position(region: MovingRegion, dt: float, desc: GridDesc,
                           refill_cell=None, refill_face=None) -> MovingRegion:
    """Advance the window by u_g*dt: accumulate offset, wrap into [0,dx) with an
    integer window shift, and refill cells whose lattice membership or
    interpreted position changed via the supplied pre-shift samplers.

    refill_cell(idx, positions) and refill_face(idx, positions, axis) sample
    the pre-update state and write the results back into the caller's arrays;
    when omitted, only geometry is updated.
    """
    if region.frozen:
        return region.copy()
    if not np.all(np.isfinite(region.u_g)):
        raise RegionError("non-finite grid velocity")
    new = region.copy()
    dx = desc.dx
    shift = np.zeros(desc.dim, dtype=np.intp)
    for a in range(desc.dim):
        if not region.axis_mask[a]:
            continue
        o = region.offset[a] + region.u_g[a] * dt
        s = int(np.floor(o / dx))
        new.offset[a] = o - s * dx
        shift[a] = s
    lo = region.lo + shift
    hi = region.hi + shift
    if any(lo[a] < MARGIN or hi[a] > desc.shape[a] - MARGIN for a in range(desc.dim)):
        warnings.warn("moving region reached the domain margin; freezing it",
                      RegionFrozenWarning)
        new.frozen = True
        new.u_g[:] = 0.0
        return new
    new.lo, new.hi = lo, hi

    if refill_cell is not None and (np.any(shift != 0) or np.any(new.offset != region.offset)):
        _refill_region_fields(region, new, desc, refill_cell, refill_face)
    return new


def _refill_region_fields(old: MovingRegion, new: MovingRegion, desc: GridDesc,
                          refill_cell, refill_face) -> None:
    """Resample cells (and faces) of the union of old/new windows at their
    post-update interpreted world positions using pre-update samplers."""
    dx = desc.dx
    lo = np.minimum(old.lo, new.lo)
    hi = np.maximum(old.hi, new.hi)
    grids = np.meshgrid(*[np.arange(lo[a], hi[a]) for a in range(desc.dim)],
                        indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=-1)
    in_new = np.all((idx >= new.lo) & (idx < new.hi), axis=1)
    pos = (idx + 0.5) * dx + np.asarray(desc.origin)
    pos[in_new] += new.offset
    refill_cell(idx, pos)
    if refill_face is not None:
        for a in range(desc.dim):
            f_lo = lo.copy()
            f_hi = hi.copy()
            f_hi[a] += 1
            fg = np.meshgrid(*[np.arange(f_lo[b], f_hi[b]) for b in range(desc.dim)],
                             indexing="ij")
            fidx = np.stack([g.ravel() for g in fg], axis=-1)
            stag = np.full(desc.dim, 0.5)
            stag[a] = 0.0
            fpos = (fidx + stag) * dx + np.asarray(desc.origin)
            # adjacent cells along the face normal
            left = fidx.copy()
            left[:, a] -= 1
            l_in = np.all((left >= new.lo) & (left < new.hi), axis=1)
            r_in = np.all((fidx >= new.lo) & (fidx < new.hi), axis=1)
            w = (l_in.astype(float) + r_in.astype(float)) / 2.0
            fpos = fpos + np.outer(w, new.offset)
            refill_face(fidx, fpos, a)


def update_region_velocity(region: MovingRegion, u: StaggeredVelocityField,
                           phi: ScalarField) -> MovingRegion:
    """Per allowed axis, pick the largest-magnitude face velocity adjacent to a
    liquid cell inside the window; zero when the window holds no liquid."""
    new = region.copy()
    if region.frozen:
        new.u_g[:] = 0.0
        return new
    desc = u.desc
    liquid = phi.values < 0
    win = region.cell_mask(desc)
    liq_win = liquid & win
    for a in range(desc.dim):
        if not region.axis_mask[a]:
            new.u_g[a] = 0.0
            continue
        face_adj = np.zeros(desc.face_shape(a), dtype=bool)
        sl_lo = [slice(None)] * desc.dim
        sl_hi = [slice(None)] * desc.dim
        sl_lo[a] = slice(0, desc.shape[a])
        sl_hi[a] = slice(1, desc.shape[a] + 1)
        face_adj[tuple(sl_lo)] |= liq_win
        face_adj[tuple(sl_hi)] |= liq_win
        vals = u.comps[a][face_adj]
        new.u_g[a] = float(vals[np.argmax(np.abs(vals))]) if vals.size else 0.0
    return new
