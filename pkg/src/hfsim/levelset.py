"""Level-set storage, geometry queries and PDE reinitialization.

Sign convention throughout: phi < 0 is liquid, phi > 0 is air.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .grid import GridDesc, ScalarField, StaggeredVelocityField

THETA_MIN = 0.01
EPS_SPEED = 1e-12

REINIT_ITERS = 10
REINIT_BAND = 5


@dataclass
class LevelSet:
    phi: ScalarField
    band_width: int = REINIT_BAND

    @property
    def desc(self) -> GridDesc:
        return self.phi.desc

    def copy(self) -> "LevelSet":
        return LevelSet(self.phi.copy(), self.band_width)


# --- analytic signed-distance primitives (scene building blocks) ---

def sdf_sphere(center, radius):
    center = np.asarray(center, dtype=float)

    def fn(pts):
        return np.linalg.norm(pts - center, axis=-1) - radius
    return fn


def sdf_box(lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)

    def fn(pts):
        d = np.maximum(lo - pts, pts - hi)
        outside = np.linalg.norm(np.maximum(d, 0.0), axis=-1)
        inside = np.minimum(np.max(d, axis=-1), 0.0)
        return outside + inside
    return fn


def sdf_halfspace(point, normal):
    """phi < 0 on the side the normal points away from."""
    point = np.asarray(point, dtype=float)
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)

    def fn(pts):
        return np.tensordot(pts - point, n, axes=([-1], [0]))
    return fn


def sdf_union(*fns):
    def fn(pts):
        return np.minimum.reduce([f(pts) for f in fns])
    return fn


# --- face liquid fractions ---

def _pair_fraction(a, b):
    """Fraction of the segment between two phi samples that is liquid."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    both_liq = (a < 0) & (b < 0)
    both_air = (a >= 0) & (b >= 0)
    neg = np.where(a < 0, a, b)
    pos = np.where(a < 0, b, a)
    denom = neg - pos
    theta = np.where(denom != 0, neg / np.where(denom != 0, denom, 1.0), 0.5)
    out = np.where(both_liq, 1.0, np.where(both_air, 0.0, theta))
    return np.clip(out, 0.0, 1.0)


def _tri_neg_fraction(a, b, c):
    """Area fraction with value < 0 on a triangle with linear vertex values."""
    v = np.sort(np.stack([a, b, c], axis=-1), axis=-1)
    lo, mid, hi = v[..., 0], v[..., 1], v[..., 2]
    all_neg = hi < 0
    all_pos = lo >= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        one_neg = np.where((lo < 0) & (mid >= 0),
                           lo * lo / ((lo - mid) * (lo - hi)), 0.0)
        two_neg = np.where((mid < 0) & (hi >= 0),
                           1.0 - hi * hi / ((hi - lo) * (hi - mid)), 0.0)
    out = np.where(all_neg, 1.0, np.where(all_pos, 0.0, one_neg + two_neg))
    return np.clip(np.nan_to_num(out), 0.0, 1.0)


def quad_area_fraction(v00, v10, v11, v01):
    """Liquid-area fraction of a quad from its 4 corner phi values.

    The quad is fanned into 4 triangles around the corner average, which
    resolves the marching-squares saddle case deterministically.
    """
    v00 = np.asarray(v00, dtype=float)
    ctr = (v00 + v10 + v11 + v01) / 4.0
    return (_tri_neg_fraction(v00, v10, ctr) + _tri_neg_fraction(v10, v11, ctr)
            + _tri_neg_fraction(v11, v01, ctr) + _tri_neg_fraction(v01, v00, ctr)) / 4.0


def _node_values(phi_values: np.ndarray) -> np.ndarray:
    """Average cell-centered values onto the node lattice (edge-replicated)."""
    dim = phi_values.ndim
    v = phi_values
    for a in range(dim):
        padded = np.concatenate([np.take(v, [0], axis=a), v, np.take(v, [-1], axis=a)],
                                axis=a)
        n = padded.shape[a]
        v = 0.5 * (np.take(padded, range(0, n - 1), axis=a)
                   + np.take(padded, range(1, n), axis=a))
    return v


def liquid_fraction_faces(phi: ScalarField) -> list[np.ndarray]:
    """Per-axis arrays of face liquid fractions [A], clamped to [0,1].

    2D: linear fraction from the two straddling cell centers.  3D: marching
    area rule on the face quad, corner values averaged from incident cells.
    """
    vals = phi.values
    dim = vals.ndim
    out = []
    if dim == 2:
        for a in range(2):
            left = np.concatenate([np.take(vals, [0], axis=a), vals], axis=a)
            right = np.concatenate([vals, np.take(vals, [-1], axis=a)], axis=a)
            out.append(_pair_fraction(left, right))
    else:
        nodes = _node_values(vals)  # shape (nx+1, ny+1, nz+1)
        for a in range(3):
            t1, t2 = [t for t in range(3) if t != a]
            # face quad corners live on the node lattice restricted to the face plane
            def corner(d1, d2):
                idx = [slice(None)] * 3
                n1 = nodes.shape[t1] - 1
                n2 = nodes.shape[t2] - 1
                idx[t1] = slice(d1, n1 + d1)
                idx[t2] = slice(d2, n2 + d2)
                return nodes[tuple(idx)]
            out.append(quad_area_fraction(corner(0, 0), corner(1, 0),
                                          corner(1, 1), corner(0, 1)))
    return out


def liquid_fraction_face(phi: LevelSet | ScalarField, axis: int, index) -> float:
    field = phi.phi if isinstance(phi, LevelSet) else phi
    shp = field.desc.face_shape(axis)
    idx = tuple(int(i) for i in index)
    if len(idx) != field.desc.dim or any(not 0 <= i < n for i, n in zip(idx, shp)):
        raise IndexError(f"face {index} invalid for axis {axis} layout {shp}")
    return float(liquid_fraction_faces(field)[axis][idx])


def ghost_fluid_factor(phi_liquid: float, phi_air: float,
                       theta_min: float = THETA_MIN) -> float:
    """Inverse liquid fraction 1/theta along the face-normal segment."""
    if not phi_liquid < 0:
        raise ValueError(f"ghost_fluid_factor needs phi_liquid < 0, got {phi_liquid}")
    if not 0 < theta_min <= 1:
        raise ValueError("theta_min must be in (0,1]")
    theta = phi_liquid / (phi_liquid - phi_air)
    return 1.0 / max(theta, theta_min)


# --- CFL time step ---

def cfl_time_step(u: StaggeredVelocityField, regions, cfl: float,
                  dt_min: float, dt_max: float) -> float:
    """dt = cfl*dx / max relative speed, clamped to [dt_min, dt_max].

    Inside moving-grid windows the grid velocity is subtracted first, so a
    feature co-moving with its window does not limit the step.
    """
    if not cfl > 0:
        raise ValueError("cfl must be positive")
    desc = u.desc
    speed = 0.0
    for a in range(desc.dim):
        comp = np.abs(u.comps[a]).copy()
        for reg in regions:
            sl = tuple(slice(reg.lo[b], reg.hi[b] + (1 if b == a else 0))
                       for b in range(desc.dim))
            comp[sl] = np.abs(u.comps[a][sl] - reg.u_g[a])
        if comp.size:
            speed = max(speed, float(comp.max()))
    dt = cfl * desc.dx / max(speed, EPS_SPEED)
    return float(min(max(dt, dt_min), dt_max))


# --- reinitialization ---

def reinitialize(ls: LevelSet, iters: int = REINIT_ITERS) -> LevelSet:
    """PDE-based redistancing: Godunov upwind sweeps with an interface-anchored
    update so the zero crossing does not drift.  Fixed iteration count,
    pseudo-step 0.5*dx, restricted to a narrow band."""
    desc = ls.desc
    dx = desc.dx
    phi0 = ls.phi.values.copy()
    dtau = 0.5 * dx

    band = np.abs(phi0) <= ls.band_width * dx
    pos = phi0 > 0

    # interface cells: phi0 changes sign with an axis neighbor
    interface = np.zeros(desc.shape, dtype=bool)
    for a in range(desc.dim):
        nxt = np.concatenate([np.take(phi0, range(1, phi0.shape[a]), axis=a),
                              np.take(phi0, [-1], axis=a)], axis=a)
        prv = np.concatenate([np.take(phi0, [0], axis=a),
                              np.take(phi0, range(0, phi0.shape[a] - 1), axis=a)], axis=a)
        interface |= (phi0 * nxt < 0) | (phi0 * prv < 0)
    interface |= phi0 == 0

    # subcell distance estimate for interface cells (Russo-Smereka anchor)
    grad2 = np.zeros_like(phi0)
    for a in range(desc.dim):
        nxt = np.concatenate([np.take(phi0, range(1, phi0.shape[a]), axis=a),
                              np.take(phi0, [-1], axis=a)], axis=a)
        prv = np.concatenate([np.take(phi0, [0], axis=a),
                              np.take(phi0, range(0, phi0.shape[a] - 1), axis=a)], axis=a)
        grad2 += ((nxt - prv) / (2 * dx)) ** 2
    gnorm = np.maximum(np.sqrt(grad2), 1e-12)
    dist_anchor = phi0 / gnorm

    sgn = np.where(phi0 >= 0, 1.0, -1.0)
    s_smooth = phi0 / np.sqrt(phi0 ** 2 + dx ** 2)
    dtau_s = dtau * s_smooth

    phi = phi0.copy()
    update_mask = band & ~interface
    for _ in range(iters):
        phi = kernels.reinit_godunov(phi, pos, dtau_s, dx, update_mask)
        phi = np.where(interface & band,
                       phi - (dtau / dx) * (sgn * np.abs(phi) - dist_anchor),
                       phi)
    out = ls.copy()
    out.phi.values = np.ascontiguousarray(phi)
    return out
