"""Isoparametric seam elements bridging a moving window to the background grid.

Elements are the lattice quads of cell centers whose corners mix displaced
(window) and static (background) nodes.  Quadrature is the tensor Gauss rule
at +-1/sqrt(3) with unit weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from shapely.geometry import box as shapely_box
from shapely.geometry import LineString, Polygon
from shapely.ops import unary_union

from .grid import GridDesc, ScalarField
from .regions import FEM_BAND, HybridLayout, MovingRegion

GAUSS = 1.0 / np.sqrt(3.0)


class MeshError(RuntimeError):
    pass


def node_bits(dim: int) -> np.ndarray:
    """Lexicographic node ordering: node i has corner bit (i>>a)&1 on axis a."""
    return np.array([[(i >> a) & 1 for a in range(dim)] for i in range(1 << dim)])


def shape_values(xi: np.ndarray, dim: int) -> np.ndarray:
    """Multilinear shape functions at unit coordinates xi (..., dim)."""
    xi = np.asarray(xi, dtype=float)
    bits = node_bits(dim)
    out = np.ones(xi.shape[:-1] + (1 << dim,))
    for a in range(dim):
        t = xi[..., a:a + 1]
        s = np.where(bits[:, a] == 1, (1 + t) / 2, (1 - t) / 2)
        out = out * s
    return out


def shape_gradients(xi: np.ndarray, dim: int) -> np.ndarray:
    """d N_i / d xi_a at unit coordinates, shape (..., dim, 2^dim)."""
    xi = np.asarray(xi, dtype=float)
    bits = node_bits(dim)
    nn = 1 << dim
    out = np.empty(xi.shape[:-1] + (dim, nn))
    for a in range(dim):
        g = np.ones(xi.shape[:-1] + (nn,))
        for b in range(dim):
            if b == a:
                g = g * np.where(bits[:, b] == 1, 0.5, -0.5)
            else:
                t = xi[..., b:b + 1]
                g = g * np.where(bits[:, b] == 1, (1 + t) / 2, (1 - t) / 2)
        out[..., a, :] = g
    return out


def map_to_world(node_pos: np.ndarray, xi: np.ndarray) -> np.ndarray:
    dim = node_pos.shape[1]
    return shape_values(xi, dim) @ node_pos


def gauss_points(dim: int) -> tuple[np.ndarray, np.ndarray]:
    bits = node_bits(dim)
    pts = np.where(bits == 1, GAUSS, -GAUSS).astype(float)
    return pts, np.ones(len(pts))


@dataclass
class Element:
    node_cells: np.ndarray    # (2^dim, dim) background cell indices of the nodes
    node_moving: np.ndarray   # bool per node: displaced by the region offset
    node_pos: np.ndarray      # (2^dim, dim) world node positions
    node_phi: np.ndarray      # level set sampled at the nodes
    region_id: int
    qp_xi: np.ndarray = None
    qp_w: np.ndarray = None
    qp_x: np.ndarray = None
    qp_detJ: np.ndarray = None
    qp_B: np.ndarray = None   # (nq, dim, 2^dim) world-frame shape gradients

    def __post_init__(self):
        if self.qp_xi is None:
            self._build_quadrature()

    def _build_quadrature(self):
        dim = self.node_pos.shape[1]
        xi, w = gauss_points(dim)
        grads = shape_gradients(xi, dim)            # (nq, dim, nn)
        jac = grads @ self.node_pos                 # J^T: (nq, dim, dim), [a,b]=dx_b/dxi_a
        det = np.linalg.det(jac)
        if np.any(det <= 0):
            raise MeshError(f"degenerate seam element (|J| <= 0) at nodes "
                            f"{self.node_cells.tolist()}")
        self.qp_xi = xi
        self.qp_w = w
        self.qp_x = map_to_world(self.node_pos, xi)
        self.qp_detJ = det
        # grad_x N = J^{-T} grad_xi N; jac holds J^T so solve directly
        self.qp_B = np.linalg.solve(jac, grads)

    @property
    def dim(self) -> int:
        return self.node_pos.shape[1]

    @property
    def num_nodes(self) -> int:
        return len(self.node_pos)

    @property
    def center(self) -> np.ndarray:
        return self.node_pos.mean(axis=0)

    @property
    def volume(self) -> float:
        return float(self.qp_w @ self.qp_detJ)

    def polygon(self) -> Polygon:
        if self.dim != 2:
            raise NotImplementedError("element polygons are 2D only")
        ring = [0, 1, 3, 2]  # lexicographic nodes -> ccw boundary order
        return Polygon([tuple(self.node_pos[i]) for i in ring])


def _gauss_dets(node_pos: np.ndarray) -> np.ndarray:
    """Jacobian determinants of the multilinear map at the Gauss points."""
    dim = node_pos.shape[1]
    xi, _ = gauss_points(dim)
    return np.linalg.det(shape_gradients(xi, dim) @ node_pos)


def build_seam_elements(layout: HybridLayout, phi: ScalarField) -> list[Element]:
    """Create the deformable quad ring for every region.

    An element is a cell-center lattice quad with at least one window corner
    and one background corner; quads whose nodes are all in air are dropped.
    """
    desc = layout.desc
    if desc.dim != 2 and layout.regions:
        raise NotImplementedError("moving-grid seams are implemented in 2D")
    dx = desc.dx
    origin = np.asarray(desc.origin)
    bits = node_bits(desc.dim)
    elements: list[Element] = []
    for rid, reg in enumerate(layout.regions):
        lo, hi = reg.lo, reg.hi
        ranges = [np.arange(lo[a] - 1, hi[a]) for a in range(desc.dim)]
        grids = np.meshgrid(*ranges, indexing="ij")
        corners = np.stack([g.ravel() for g in grids], axis=-1)
        for base in corners:
            cells = base + bits
            moving = np.all((cells >= lo) & (cells < hi), axis=1)
            if moving.all() or not moving.any():
                continue
            pos = origin + (cells + 0.5) * dx + np.outer(moving, reg.offset)
            node_phi = phi.values[tuple(cells.T)]
            if np.all(node_phi >= 0):
                continue  # wholly in air: no pressure work for this element
            if _gauss_dets(pos).min() <= 1e-12 * dx ** desc.dim:
                # the lone-corner quad folds once the diagonal offset exceeds
                # one cell (ox+oy > dx): split along the 00-11 diagonal into
                # two collapsed quads, valid for any offset in [0,dx)
                for tri in ((0, 1, 0, 3), (0, 3, 0, 2)):
                    t = list(tri)
                    elements.append(Element(cells[t], moving[t], pos[t],
                                            node_phi[t], rid))
                continue
            elements.append(Element(cells, moving, pos, node_phi, rid))
    layout.elements = elements
    _build_locator(layout)
    return elements


def _build_locator(layout: HybridLayout) -> None:
    """cell index -> candidate element ids, from element bounding boxes."""
    desc = layout.desc
    dx = desc.dx
    origin = np.asarray(desc.origin)
    locator: dict[tuple, list[int]] = {}
    for eid, el in enumerate(layout.elements):
        lo = np.floor((el.node_pos.min(axis=0) - origin) / dx - 1e-12).astype(int)
        hi = np.floor((el.node_pos.max(axis=0) - origin) / dx + 1e-12).astype(int)
        for idx in np.ndindex(*(hi - lo + 1)):
            key = tuple(int(lo[a] + idx[a]) for a in range(desc.dim))
            locator.setdefault(key, []).append(eid)
    layout.elem_locator = locator


def adjust_control_volumes(layout: HybridLayout) -> HybridLayout:
    """Remove the seam elements' footprint (and window-box overlap) from the
    finite-volume control volumes so no area is integrated twice.

    Static cells yield both to elements and to the displaced window box;
    window cells (on the displaced lattice) yield to elements only.
    """
    desc = layout.desc
    dx = desc.dx
    origin = np.asarray(desc.origin)
    cv = np.full(desc.shape, dx ** desc.dim)
    if not layout.regions:
        layout.control_volume = cv
        return layout
    if desc.dim != 2:
        raise NotImplementedError("control-volume adjustment is 2D")

    elems_by_region: dict[int, list[Polygon]] = {}
    for el in layout.elements:
        elems_by_region.setdefault(el.region_id, []).append(el.polygon())

    for rid, reg in enumerate(layout.regions):
        band = unary_union(elems_by_region.get(rid, []))
        win_poly = shapely_box(*(origin + reg.lo * dx + reg.offset),
                               *(origin + reg.hi * dx + reg.offset))
        pad = 2
        for i in range(int(reg.lo[0]) - pad, int(reg.hi[0]) + pad):
            for j in range(int(reg.lo[1]) - pad, int(reg.hi[1]) + pad):
                if not (0 <= i < desc.shape[0] and 0 <= j < desc.shape[1]):
                    continue
                in_window = reg.contains_cell((i, j))
                ox, oy = reg.offset if in_window else (0.0, 0.0)
                cell = shapely_box(origin[0] + i * dx + ox, origin[1] + j * dx + oy,
                                   origin[0] + (i + 1) * dx + ox,
                                   origin[1] + (j + 1) * dx + oy)
                free = cell.difference(band)
                if not in_window:
                    free = free.difference(win_poly)
                cv[i, j] = free.area
    layout.control_volume = cv
    _face_apertures(layout, elems_by_region)
    return layout


def _face_apertures(layout: HybridLayout, elems_by_region: dict) -> None:
    """Free length of each face: the part not covered by seam elements (or by
    the displaced window, for background faces).

    Seam faces get zero aperture — their coupling is carried entirely by the
    elements — which keeps the assembled operator exact for linear pressure at
    any window offset.
    """
    desc = layout.desc
    dx = desc.dx
    origin = np.asarray(desc.origin)
    ap = [np.full(desc.face_shape(a), dx) for a in range(2)]
    for rid, reg in enumerate(layout.regions):
        band = unary_union(elems_by_region.get(rid, []))
        win_poly = shapely_box(*(origin + reg.lo * dx + reg.offset),
                               *(origin + reg.hi * dx + reg.offset))
        pad = 2
        for a in range(2):
            t = 1 - a
            for i in range(int(reg.lo[a]) - pad, int(reg.hi[a]) + pad + 1):
                for j in range(int(reg.lo[t]) - pad, int(reg.hi[t]) + pad):
                    fidx = (i, j) if a == 0 else (j, i)
                    if any(not 0 <= fidx[b] < desc.face_shape(a)[b] for b in range(2)):
                        continue
                    right = list(fidx)
                    left = list(fidx)
                    left[a] -= 1
                    l_in = reg.contains_cell(left)
                    r_in = reg.contains_cell(right)
                    if l_in != r_in:
                        ap[a][fidx] = 0.0      # seam: coupled through elements
                        continue
                    off = reg.offset if l_in else np.zeros(2)
                    p0 = origin + np.array(fidx, dtype=float) * dx + off
                    p1 = p0.copy()
                    p1[t] += dx
                    seg = LineString([tuple(p0), tuple(p1)]).difference(band)
                    if not l_in:
                        seg = seg.difference(win_poly)
                    ap[a][fidx] = seg.length
    layout.face_aperture = ap


def rebuild_hybrid(desc: GridDesc, regions, phi: ScalarField) -> HybridLayout:
    """Label cells, build seam elements, and adjust control volumes."""
    from .regions import label_cells
    layout = label_cells(desc, regions)
    build_seam_elements(layout, phi)
    adjust_control_volumes(layout)
    return layout
