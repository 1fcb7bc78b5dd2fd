"""Sampling across the hybrid discretization.

Cell-centered values: multilinear on whichever lattice owns the query point,
element-wise (Newton unit-coordinate inversion) inside the seam band.
Face-centered values: multilinear away from the seam, moving-least-squares
over mixed-lattice face samples near it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .elements import (Element, map_to_world, node_bits, shape_gradients,
                       shape_values)
from .grid import ScalarField, StaggeredVelocityField
from .regions import HybridLayout

EPS_SAFETY = 1e-4          # MLS weight floor
MLS_COND_LIMIT = 1e12
NEWTON_MAX_ITER = 20
NEWTON_TOL = 1e-10


class NewtonError(RuntimeError):
    pass


@dataclass
class MlsSample:
    position: np.ndarray
    value: float
    weight: float


def weight_fvm(r, h: float, eps: float = EPS_SAFETY):
    """Tent-product weight: prod_j max(1 - |r_j|/h, eps)."""
    if not h > 0:
        raise ValueError("support h must be positive")
    r = np.atleast_2d(np.asarray(r, dtype=float))
    w = np.prod(np.maximum(1.0 - np.abs(r) / h, eps), axis=-1)
    return w if w.size > 1 else float(w[0])


def _safe_solve(jacT: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Newton step solve that zeroes updates where the Jacobian degenerates
    (queries far outside a quad can fold the bilinear map)."""
    det = np.linalg.det(jacT)
    bad = ~np.isfinite(det) | (np.abs(det) < 1e-30)
    if bad.any():
        jacT = jacT.copy()
        jacT[bad] = np.eye(jacT.shape[-1])
    delta = np.linalg.solve(np.swapaxes(jacT, -1, -2), r[..., None])[..., 0]
    if bad.any():
        delta[bad] = 0.0
    return delta


def _newton_batch(node_pos: np.ndarray, pts: np.ndarray, dx: float,
                  max_iter: int = NEWTON_MAX_ITER) -> tuple[np.ndarray, np.ndarray]:
    """Invert the multilinear map for a batch of points against one element.

    Returns (xi, converged).  xi is left unclamped so callers can use slightly
    exterior coordinates for virtual elements.
    """
    dim = node_pos.shape[1]
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    xi = np.zeros_like(pts)
    tol = NEWTON_TOL * dx
    converged = np.zeros(len(pts), dtype=bool)
    for _ in range(max_iter):
        r = map_to_world(node_pos, xi) - pts
        converged = np.linalg.norm(r, axis=-1) < tol
        if converged.all():
            break
        jacT = shape_gradients(xi, dim) @ node_pos   # [a,b] = dx_b / dxi_a
        delta = _safe_solve(jacT, r)
        xi = np.clip(xi - delta, -8.0, 8.0)
    else:
        r = map_to_world(node_pos, xi) - pts
        converged = np.linalg.norm(r, axis=-1) < tol
    return xi, converged


def newton_unit_coords(element: Element, x) -> np.ndarray:
    """Unit coordinates of a world point in an element; error on divergence."""
    x = np.asarray(x, dtype=float)
    dx = float(np.max(np.abs(element.node_pos.max(0) - element.node_pos.min(0))))
    xi, ok = _newton_batch(element.node_pos, x[None, :], dx)
    if not ok[0]:
        raise NewtonError(f"unit-coordinate Newton failed to converge for {x}")
    return xi[0]


def _newton_quads(node_pos: np.ndarray, pts: np.ndarray, dx: float,
                  max_iter: int = NEWTON_MAX_ITER) -> tuple[np.ndarray, np.ndarray]:
    """Per-point variant of _newton_batch: one quad per point, node_pos (m,nn,dim)."""
    dim = node_pos.shape[-1]
    xi = np.zeros((len(pts), dim))
    tol = NEWTON_TOL * dx
    converged = np.zeros(len(pts), dtype=bool)
    for _ in range(max_iter):
        N = shape_values(xi, dim)
        r = np.einsum("mn,mnd->md", N, node_pos) - pts
        converged = np.linalg.norm(r, axis=-1) < tol
        if converged.all():
            break
        jacT = shape_gradients(xi, dim) @ node_pos
        delta = _safe_solve(jacT, r)
        xi = np.clip(xi - delta, -8.0, 8.0)
    return xi, converged


def weight_fem(node_pos: np.ndarray, present: np.ndarray, x) -> np.ndarray:
    """Elemental interpolation coefficients used as MLS weights.

    node_pos are the virtual element's nodes (defining points, with grid-node
    positions substituted where no element exists); `present` marks nodes that
    actually carry a sample.  All weights are returned; absent nodes simply
    contribute no sample.
    """
    node_pos = np.asarray(node_pos, dtype=float)
    dim = node_pos.shape[1]
    span = float(np.max(node_pos.max(0) - node_pos.min(0)))
    xi, ok = _newton_batch(node_pos, np.asarray(x, dtype=float)[None, :], span)
    if not ok[0]:
        raise NewtonError(f"virtual-element Newton failed for {x}")
    return shape_values(xi[0], dim)


def _mls_solve(P: np.ndarray, vals: np.ndarray, w: np.ndarray):
    """Weighted linear fit in centered/scaled coordinates, evaluated at 0.

    P: (m, K, dim) sample offsets, vals: (m, K), w: (m, K).
    Returns (fit values, ok mask).
    """
    m, K, dim = P.shape
    Z = np.concatenate([P, np.ones((m, K, 1))], axis=-1)
    Zw = Z * w[..., None]
    A = np.swapaxes(Z, 1, 2) @ Zw
    b = np.einsum("mkj,mk->mj", Zw, vals)
    det = np.linalg.det(A)
    scale = np.maximum(np.trace(A, axis1=1, axis2=2) / (dim + 1), 1e-300)
    ok = np.abs(det) > (scale ** (dim + 1)) / MLS_COND_LIMIT
    out = np.zeros(m)
    if ok.any():
        c = np.linalg.solve(A[ok], b[ok][..., None])[..., 0]
        out[ok] = c[:, dim]
    return out, ok


def mls_fit(samples: list[MlsSample], query) -> float:
    """Weighted MLS fit at a query point; reproduces affine fields exactly.

    Falls back to the weight-averaged value (and counts it) when the normal
    matrix is numerically singular.
    """
    query = np.asarray(query, dtype=float)
    dim = len(query)
    if len(samples) < dim + 1:
        raise ValueError(f"need at least {dim + 1} samples, got {len(samples)}")
    pos = np.array([s.position for s in samples], dtype=float)
    vals = np.array([s.value for s in samples], dtype=float)
    w = np.array([s.weight for s in samples], dtype=float)
    if np.any(w < 0):
        raise ValueError("negative MLS weight")
    h = max(np.max(np.abs(pos - query)), 1e-300)
    fit, ok = _mls_solve((pos - query)[None] / h, vals[None], w[None])
    if ok[0]:
        return float(fit[0])
    mls_fit.fallbacks += 1
    return float(np.sum(w * vals) / np.sum(w))


mls_fit.fallbacks = 0


# --- unified samplers ---

class CellSampler:
    """Samples a cell-centered field anywhere in the domain."""

    def __init__(self, field: ScalarField, layout: HybridLayout):
        self.field = field
        self.layout = layout
        self.desc = field.desc
        self.origin = np.asarray(self.desc.origin)
        self.dx = self.desc.dx

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        vals = np.empty(len(pts))
        done = np.zeros(len(pts), dtype=bool)
        for reg in self.layout.regions:
            inner_lo = self.origin + (reg.lo + 0.5) * self.dx + reg.offset
            inner_hi = self.origin + (reg.hi - 0.5) * self.dx + reg.offset
            outer_lo = self.origin + (reg.lo - 0.5) * self.dx
            outer_hi = self.origin + (reg.hi + 0.5) * self.dx
            in_inner = np.all((pts >= inner_lo) & (pts <= inner_hi), axis=1) & ~done
            if in_inner.any():
                coords = (pts[in_inner] - reg.offset - self.origin) / self.dx - 0.5
                vals[in_inner] = kernels.sample_multilinear(self.field.values, coords)
                done |= in_inner
            # conservative annulus candidate box; resolved per element below
            in_ann = (np.all((pts >= outer_lo - self.dx) &
                             (pts <= outer_hi + self.dx), axis=1) & ~done)
            if in_ann.any():
                idx = np.where(in_ann)[0]
                resolved = self._sample_elements(pts[idx], vals, idx)
                done[idx[resolved]] = True
        if not done.all():
            rest = ~done
            coords = (pts[rest] - self.origin) / self.dx - 0.5
            vals[rest] = kernels.sample_multilinear(self.field.values, coords)
        return vals

    def _sample_elements(self, pts, vals, out_idx) -> np.ndarray:
        """Try to attribute points to seam elements; returns resolved mask."""
        desc = self.desc
        resolved = np.zeros(len(pts), dtype=bool)
        if not self.layout.elements:
            return resolved
        keys = np.floor((pts - self.origin) / self.dx).astype(int)
        order = {}
        for p, key in enumerate(map(tuple, keys)):
            for eid in self.layout.elem_locator.get(key, ()):
                order.setdefault(eid, []).append(p)
        for eid, plist in sorted(order.items()):
            plist = [p for p in plist if not resolved[p]]
            if not plist:
                continue
            el = self.layout.elements[eid]
            xi, ok = _newton_batch(el.node_pos, pts[plist], self.dx)
            inside = ok & np.all(np.abs(xi) <= 1.0 + 1e-9, axis=1)
            if inside.any():
                node_vals = self.field.values[tuple(el.node_cells.T)]
                sel = np.array(plist)[inside]
                vals[out_idx[sel]] = shape_values(xi[inside], desc.dim) @ node_vals
                resolved[sel] = True
        return resolved

    def bounds(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Min/max of stored values in the index neighborhood of each point."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        coords = (pts - self.origin) / self.dx - 0.5
        return _neighborhood_bounds(self.field.values, coords)


def _neighborhood_bounds(values: np.ndarray, coords: np.ndarray):
    dim = values.ndim
    i0 = np.empty((len(coords), dim), dtype=np.intp)
    for a in range(dim):
        i0[:, a] = np.clip(np.floor(coords[:, a]).astype(np.intp) - 1, 0,
                           values.shape[a] - 1)
    lo = np.full(len(coords), np.inf)
    hi = np.full(len(coords), -np.inf)
    span = 4 if dim == 2 else 3
    for off in np.ndindex(*([span] * dim)):
        idx = tuple(np.minimum(i0[:, a] + off[a], values.shape[a] - 1)
                    for a in range(dim))
        v = values[idx]
        lo = np.minimum(lo, v)
        hi = np.maximum(hi, v)
    return lo, hi


class FaceSampler:
    """Samples one velocity component anywhere; MLS near the seam."""

    def __init__(self, u: StaggeredVelocityField, layout: HybridLayout):
        self.u = u
        self.layout = layout
        self.desc = u.desc
        self.origin = np.asarray(self.desc.origin)
        self.dx = self.desc.dx
        self.mls_fallbacks = 0
        self._cls = layout.face_classes()
        self._pos = [layout.face_positions(a) for a in range(self.desc.dim)]

    def _stagger(self, axis: int) -> np.ndarray:
        stag = np.full(self.desc.dim, 0.5)
        stag[axis] = 0.0
        return stag

    def sample(self, pts, axis: int) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        comp = self.u.comps[axis]
        cls = self._cls[axis]
        stag = self._stagger(axis)
        vals = np.empty(len(pts))
        done = np.zeros(len(pts), dtype=bool)
        for reg in self.layout.regions:
            box_lo = np.empty(self.desc.dim)
            box_hi = np.empty(self.desc.dim)
            for b in range(self.desc.dim):
                if b == axis:
                    box_lo[b] = self.origin[b] + (reg.lo[b] + 1) * self.dx
                    box_hi[b] = self.origin[b] + (reg.hi[b] - 1) * self.dx
                else:
                    box_lo[b] = self.origin[b] + (reg.lo[b] + 0.5) * self.dx
                    box_hi[b] = self.origin[b] + (reg.hi[b] - 0.5) * self.dx
            box_lo += reg.offset
            box_hi += reg.offset
            sel = np.all((pts >= box_lo) & (pts <= box_hi), axis=1) & ~done
            if sel.any():
                coords = (pts[sel] - reg.offset - self.origin) / self.dx - stag
                vals[sel] = kernels.sample_multilinear(comp, coords)
                done |= sel
        rest = np.where(~done)[0]
        if rest.size:
            coords = (pts[rest] - self.origin) / self.dx - stag
            static_ok = np.ones(len(rest), dtype=bool)
            i0 = np.empty((len(rest), self.desc.dim), dtype=np.intp)
            for b in range(self.desc.dim):
                nb = cls.shape[b]
                c = np.clip(coords[:, b], 0.0, nb - 1.0)
                i0[:, b] = np.minimum(np.floor(c).astype(np.intp), nb - 2)
            for corner in np.ndindex(*([2] * self.desc.dim)):
                idx = tuple(i0[:, b] + corner[b] for b in range(self.desc.dim))
                static_ok &= cls[idx] == HybridLayout.FACE_STATIC
            easy = rest[static_ok]
            if easy.size:
                vals[easy] = kernels.sample_multilinear(
                    comp, (pts[easy] - self.origin) / self.dx - stag)
            hard = rest[~static_ok]
            if hard.size:
                vals[hard] = self._sample_hard(pts[hard], axis)
        return vals

    def _sample_hard(self, pts, axis: int) -> np.ndarray:
        """Queries whose stencil mixes lattices: interpolate on the deformed
        quad of surrounding face samples; MLS only when no quad contains the
        point (virtual element with missing corners)."""
        out = np.empty(len(pts))
        resolved = self._quad_interp(pts, axis, out)
        if not resolved.all():
            out[~resolved] = self._sample_mls(pts[~resolved], axis)
        return out

    def _quad_interp(self, pts, axis: int, out: np.ndarray) -> np.ndarray:
        dim = self.desc.dim
        pos = self._pos[axis]
        comp = self.u.comps[axis]
        bits = node_bits(dim)
        coords = (pts - self.origin) / self.dx - self._stagger(axis)
        base0 = np.floor(coords).astype(np.intp)
        resolved = np.zeros(len(pts), dtype=bool)
        shifts = sorted(np.ndindex(*([3] * dim)),
                        key=lambda s: sum(abs(c - 1) for c in s))
        for shift in shifts:
            todo = np.where(~resolved)[0]
            if not todo.size:
                break
            base = base0[todo] + (np.asarray(shift) - 1)
            okb = np.ones(len(todo), dtype=bool)
            for b in range(dim):
                okb &= (base[:, b] >= 0) & (base[:, b] + 1 < comp.shape[b])
            idx = base[:, None, :] + bits[None, :, :]
            cidx = tuple(np.clip(idx[..., b], 0, comp.shape[b] - 1)
                         for b in range(dim))
            node_pos = pos[cidx]
            xi, conv = _newton_quads(node_pos, pts[todo], self.dx)
            inside = okb & conv & np.all(np.abs(xi) <= 1.0 + 1e-9, axis=1)
            if inside.any():
                N = shape_values(xi[inside], dim)
                sel = todo[inside]
                out[sel] = np.einsum("mn,mn->m", N,
                                     comp[tuple(c[inside] for c in cidx)])
                resolved[sel] = True
        return resolved

    def _candidates(self, pts, axis: int, lo_off: int, hi_off: int):
        """Gather candidate face samples in an index window around each point."""
        comp = self.u.comps[axis]
        pos = self._pos[axis]
        stag = self._stagger(axis)
        dim = self.desc.dim
        base = np.floor((pts - self.origin) / self.dx - stag).astype(np.intp)
        offs = np.array(list(np.ndindex(*([hi_off - lo_off] * dim)))) + lo_off
        idx = base[:, None, :] + offs[None, :, :]
        valid = np.ones(idx.shape[:2], dtype=bool)
        for b in range(dim):
            valid &= (idx[..., b] >= 0) & (idx[..., b] < comp.shape[b])
        cidx = tuple(np.clip(idx[..., b], 0, comp.shape[b] - 1) for b in range(dim))
        cpos = pos[cidx]
        cval = comp[cidx]
        r = cpos - pts[:, None, :]
        tent = np.prod(np.maximum(1.0 - np.abs(r) / self.dx, 0.0), axis=-1)
        return r, cval, tent, valid

    def _sample_mls(self, pts, axis: int) -> np.ndarray:
        dim = self.desc.dim
        out = np.empty(len(pts))
        r, cval, tent, valid = self._candidates(pts, axis, -1, 3)
        w = tent * valid
        fit, ok = _mls_solve(r / self.dx, cval, w)
        enough = (w > 0).sum(axis=1) >= dim + 1
        good = ok & enough
        out[good] = fit[good]
        bad = np.where(~good)[0]
        if bad.size:
            # widen by one cell; all gathered samples keep at least the safety weight
            r2, cv2, tent2, valid2 = self._candidates(pts[bad], axis, -2, 4)
            w2 = np.maximum(tent2, EPS_SAFETY) * valid2
            fit2, ok2 = _mls_solve(r2 / self.dx, cv2, w2)
            out[bad[ok2]] = fit2[ok2]
            still = bad[~ok2]
            if still.size:
                self.mls_fallbacks += len(still)
                wsum = w2[~ok2].sum(axis=1)
                out[still] = (w2[~ok2] * cv2[~ok2]).sum(axis=1) / np.maximum(wsum, 1e-300)
        return out

    def bounds(self, pts, axis: int):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        coords = (pts - self.origin) / self.dx - self._stagger(axis)
        return _neighborhood_bounds(self.u.comps[axis], coords)

    def velocity(self, pts) -> np.ndarray:
        """Full velocity vectors at arbitrary points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.stack([self.sample(pts, a) for a in range(self.desc.dim)], axis=-1)


def sample_cell_value(field: ScalarField, layout: HybridLayout, x) -> float:
    return float(CellSampler(field, layout)(np.asarray(x, dtype=float)[None, :])[0])


def sample_face_value(u: StaggeredVelocityField, layout: HybridLayout, x,
                      axis: int) -> float:
    return float(FaceSampler(u, layout).sample(np.asarray(x, dtype=float)[None, :], axis)[0])
