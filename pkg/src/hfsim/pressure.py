"""Hybrid pressure solve and velocity projection.

The pressure unknown q absorbs dt/rho, so the projection is u = u* - F grad q.
Finite-volume rows cover every liquid cell with control-volume-weighted face
coefficients; seam elements add their stiffness on top.  Free-surface faces use
ghost-fluid factors; domain boundaries are closed walls.

Surface treatment modes:
  FIRST_ORDER        air pressure pinned to zero at the full cell/node
  FULL_SECOND_ORDER  ghost air values extrapolated from a liquid source
                     (nonsymmetric matrix)
  SPD_PROJECTED      ghost extrapolation followed by matrix symmetrization
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .elements import shape_gradients
from .grid import GridDesc, ScalarField, StaggeredVelocityField
from .interp import FaceSampler, _newton_batch
from .levelset import THETA_MIN, liquid_fraction_faces
from .regions import HybridLayout

FIRST_ORDER = "first_order"
SPD_PROJECTED = "spd_projected"
FULL_SECOND_ORDER = "full_second_order"
MODES = (FIRST_ORDER, SPD_PROJECTED, FULL_SECOND_ORDER)


class PressureError(RuntimeError):
    pass


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"unknown surface mode {mode!r}; expected one of {MODES}")


@dataclass
class SparseSystem:
    """Triplet accumulator over the liquid-cell unknowns."""
    desc: GridDesc
    mode: str
    index: np.ndarray          # cell -> unknown id, -1 in air
    cells: np.ndarray          # unknown id -> cell index
    rows: list = field(default_factory=list)
    cols: list = field(default_factory=list)
    vals: list = field(default_factory=list)
    rhs: np.ndarray = None

    def __post_init__(self):
        _check_mode(self.mode)
        if self.rhs is None:
            self.rhs = np.zeros(len(self.cells))

    @property
    def n(self) -> int:
        return len(self.cells)

    def add(self, rows, cols, vals) -> None:
        self.rows.append(np.asarray(rows, dtype=np.intp))
        self.cols.append(np.asarray(cols, dtype=np.intp))
        self.vals.append(np.asarray(vals, dtype=float))

    def triplets(self):
        if not self.rows:
            z = np.zeros(0)
            return z.astype(np.intp), z.astype(np.intp), z
        return (np.concatenate(self.rows), np.concatenate(self.cols),
                np.concatenate(self.vals))


@dataclass
class SolveInfo:
    mode: str
    solver: str
    n: int
    nnz: int
    iterations: int
    residual: float
    converged: bool

    def to_dict(self) -> dict:
        return {"mode": self.mode, "solver": self.solver, "n": self.n,
                "nnz": self.nnz, "iterations": self.iterations,
                "residual": self.residual, "converged": self.converged}


def liquid_unknowns(phi: ScalarField):
    """(cell->unknown map, unknown->cell list) over cells with phi < 0."""
    mask = phi.values < 0
    index = np.full(phi.desc.shape, -1, dtype=np.intp)
    index[mask] = np.arange(int(mask.sum()))
    return index, np.argwhere(mask)


def _ghost_theta(phi_liquid, phi_air):
    theta = phi_liquid / (phi_liquid - phi_air)
    return np.maximum(theta, THETA_MIN)


def assemble_fvm(layout: HybridLayout, phi: ScalarField,
                 u_star: StaggeredVelocityField, mode: str) -> SparseSystem:
    """Finite-volume rows for every liquid cell.

    Per interior face: coefficient aperture * frac / dx, where the aperture is
    the face length left free by the seam elements (zero across the seam
    itself) and frac is the face liquid fraction.  Free-surface faces keep only
    the liquid diagonal, scaled by the ghost-fluid factor.  Domain-boundary
    faces are closed.
    """
    _check_mode(mode)
    desc = layout.desc
    dx = desc.dx
    index, cells = liquid_unknowns(phi)
    sys = SparseSystem(desc, mode, index, cells)
    fracs = liquid_fraction_faces(phi)
    ph = phi.values

    for a in range(desc.dim):
        nfa = desc.shape[a] + 1
        inner = [slice(None)] * desc.dim
        inner[a] = slice(1, nfa - 1)          # interior faces only: closed walls
        frac = fracs[a][tuple(inner)]
        lsl = [slice(None)] * desc.dim
        rsl = [slice(None)] * desc.dim
        lsl[a] = slice(0, desc.shape[a] - 1)
        rsl[a] = slice(1, desc.shape[a])
        phL, phR = ph[tuple(lsl)], ph[tuple(rsl)]
        iL, iR = index[tuple(lsl)], index[tuple(rsl)]
        ap = layout.face_aperture[a][tuple(inner)]
        uf = u_star.comps[a][tuple(inner)]
        coef = ap * frac / dx
        flux = ap * frac * uf

        both = (phL < 0) & (phR < 0)
        if both.any():
            l, r, c = iL[both], iR[both], coef[both]
            sys.add(np.concatenate([l, r, l, r]), np.concatenate([l, r, r, l]),
                    np.concatenate([c, c, -c, -c]))
            np.add.at(sys.rhs, l, -flux[both])
            np.add.at(sys.rhs, r, flux[both])

        for liq_left in (True, False):
            m = (phL < 0) & (phR >= 0) if liq_left else (phR < 0) & (phL >= 0)
            if not m.any():
                continue
            p_l = phL[m] if liq_left else phR[m]
            p_a = phR[m] if liq_left else phL[m]
            F = 1.0 if mode == FIRST_ORDER else 1.0 / _ghost_theta(p_l, p_a)
            i = iL[m] if liq_left else iR[m]
            sys.add(i, i, coef[m] * F)
            np.add.at(sys.rhs, i, (-flux[m]) if liq_left else flux[m])
    return sys


def _element_ghosts(el, mode: str):
    """Per-node (source node, extrapolation factor g) for the air nodes.

    Ghost value q_air = g * q_source with g = 1 - 1/theta, exact for linear
    pressure profiles; first-order mode pins air nodes to zero instead.
    """
    liquid = el.node_phi < 0
    src = np.full(el.num_nodes, -1, dtype=int)
    g = np.zeros(el.num_nodes)
    if mode == FIRST_ORDER:
        return liquid, src, g
    liq_ids = np.where(liquid)[0]
    for j in np.where(~liquid)[0]:
        d = np.linalg.norm(el.node_pos[liq_ids] - el.node_pos[j], axis=1)
        s = int(liq_ids[np.argmin(d)])
        src[j] = s
        theta = _ghost_theta(el.node_phi[s], el.node_phi[j])
        g[j] = 1.0 - 1.0 / theta
    return liquid, src, g


def assemble_fem(layout: HybridLayout, phi: ScalarField,
                 u_star: StaggeredVelocityField, mode: str) -> SparseSystem:
    """Seam-element stiffness and divergence load on the same unknowns.

    K_e = sum_q w detJ B^T B; load_e[i] = sum_q w detJ grad(N_i) . u*(x_q)
    (the weak divergence after integration by parts).  Air-node columns are
    folded onto their ghost source node.
    """
    _check_mode(mode)
    desc = layout.desc
    index, cells = liquid_unknowns(phi)
    sys = SparseSystem(desc, mode, index, cells)
    if not layout.elements:
        return sys
    sampler = FaceSampler(u_star, layout)
    qp_x = np.concatenate([el.qp_x for el in layout.elements])
    qp_u = sampler.velocity(qp_x)
    off = 0
    for el in layout.elements:
        nq = len(el.qp_w)
        uq = qp_u[off:off + nq]
        off += nq
        wd = el.qp_w * el.qp_detJ
        K = np.einsum("q,qai,qaj->ij", wd, el.qp_B, el.qp_B)
        load = np.einsum("q,qai,qa->i", wd, el.qp_B, uq)
        liquid, src, g = _element_ghosts(el, mode)
        ids = index[tuple(el.node_cells.T)]
        if mode == SPD_PROJECTED:
            # energy-consistent elimination: fold air rows and columns onto
            # their source with weight g, keeping the matrix symmetric without
            # losing exactness for linear pressure profiles
            m = np.where(liquid, ids, ids[src])
            c = np.where(liquid, 1.0, g)
            for i in range(el.num_nodes):
                sys.rhs[m[i]] += c[i] * load[i]
                for j in range(el.num_nodes):
                    v = c[i] * c[j] * K[i, j]
                    if v != 0.0:
                        sys.add([m[i]], [m[j]], [v])
            continue
        for i in range(el.num_nodes):
            if not liquid[i]:
                continue
            sys.rhs[ids[i]] += load[i]
            for j in range(el.num_nodes):
                if liquid[j]:
                    sys.add([ids[i]], [ids[j]], [K[i, j]])
                elif src[j] >= 0 and g[j] != 0.0:
                    sys.add([ids[i]], [ids[src[j]]], [K[i, j] * g[j]])
    return sys


def merge_systems(fvm: SparseSystem, fem: SparseSystem):
    """Combine both discretizations into one sparse matrix and rhs.

    SPD_PROJECTED assembles symmetrically already; averaging with the
    transpose here only scrubs round-off asymmetry.
    """
    if fvm.n != fem.n or fvm.mode != fem.mode:
        raise PressureError("systems disagree on unknowns or mode")
    r1, c1, v1 = fvm.triplets()
    r2, c2, v2 = fem.triplets()
    n = fvm.n
    A = sp.coo_matrix((np.concatenate([v1, v2]),
                       (np.concatenate([r1, r2]), np.concatenate([c1, c2]))),
                      shape=(n, n)).tocsr()
    if fvm.mode == SPD_PROJECTED:
        A = (A + A.T) * 0.5
    return A, fvm.rhs + fem.rhs


def _jacobi_pcg(A, b, tol: float, maxiter: int):
    """Jacobi-preconditioned conjugate gradients with relative residual stop."""
    d = A.diagonal()
    minv = np.where(np.abs(d) > 1e-300, 1.0 / np.where(d != 0, d, 1.0), 1.0)
    x = np.zeros_like(b)
    r = b.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return x, 0, 0.0, True
    z = minv * r
    p = z.copy()
    rz = r @ z
    for k in range(1, maxiter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            return x, k, np.linalg.norm(r) / bnorm, False
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / bnorm
        if res < tol:
            return x, k, res, True
        z = minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, maxiter, np.linalg.norm(r) / bnorm, False


def solve_system(A, rhs, mode: str, tol: float = 1e-4, maxiter: int = None):
    """Solve the merged system; CG for the symmetric modes, BiCGStab otherwise."""
    _check_mode(mode)
    n = len(rhs)
    if n == 0:
        return np.zeros(0), SolveInfo(mode, "none", 0, 0, 0, 0.0, True)
    if maxiter is None:
        maxiter = max(10 * n, 100)
    if mode == FULL_SECOND_ORDER:
        d = A.diagonal()
        minv = np.where(d != 0, 1.0 / np.where(d != 0, d, 1.0), 1.0)
        M = spla.LinearOperator((n, n), matvec=lambda v: minv * v)
        iters = [0]

        def cb(_):
            iters[0] += 1
        try:
            q, code = spla.bicgstab(A, rhs, rtol=tol, atol=0.0, maxiter=maxiter,
                                    M=M, callback=cb)
        except TypeError:  # older scipy spelled the tolerance "tol"
            q, code = spla.bicgstab(A, rhs, tol=tol, atol=0.0, maxiter=maxiter,
                                    M=M, callback=cb)
        res = float(np.linalg.norm(rhs - A @ q) / max(np.linalg.norm(rhs), 1e-300))
        info = SolveInfo(mode, "bicgstab", n, A.nnz, iters[0], res, code == 0)
    else:
        q, iters, res, ok = _jacobi_pcg(A, rhs, tol, maxiter)
        info = SolveInfo(mode, "jacobi_pcg", n, A.nnz, iters, float(res), ok)
    if not info.converged:
        raise PressureError(f"pressure solve stalled: {info}")
    return q, info


def solve_pressure(layout: HybridLayout, phi: ScalarField,
                   u_star: StaggeredVelocityField, mode: str,
                   tol: float = 1e-4, maxiter: int = None):
    """Assemble and solve; returns (cell pressure field, SolveInfo)."""
    fvm = assemble_fvm(layout, phi, u_star, mode)
    fem = assemble_fem(layout, phi, u_star, mode)
    A, rhs = merge_systems(fvm, fem)
    q, info = solve_system(A, rhs, mode, tol, maxiter)
    out = ScalarField.zeros(layout.desc)
    if len(q):
        out.values[tuple(fvm.cells.T)] = q
    return out, info


# --- projection ---

def _ghost_nodal_values(el, q_values, index_mode: str):
    """Nodal pressures with air nodes filled by their ghost extrapolation."""
    vals = q_values[tuple(el.node_cells.T)].copy()
    liquid, src, g = _element_ghosts(el, index_mode)
    for j in np.where(~liquid)[0]:
        vals[j] = g[j] * vals[src[j]] if src[j] >= 0 else 0.0
    return vals


def _project_seam_faces(u, q, layout, phi, mode):
    desc = layout.desc
    dx = desc.dx
    origin = np.asarray(desc.origin)
    fclasses = layout.face_classes()
    ph = phi.values
    for a in range(desc.dim):
        cls = fclasses[a]
        stag = np.full(desc.dim, 0.5)
        stag[a] = 0.0
        for reg in layout.regions:
            sl = tuple(slice(max(int(reg.lo[b]) - 1, 0),
                             int(reg.hi[b]) + 1 + (1 if b == a else 0))
                       for b in range(desc.dim))
            local = np.argwhere(cls[sl] == HybridLayout.FACE_SEAM)
            if not local.size:
                continue
            base = np.array([s.start for s in sl])
            for fidx in local + base:
                left = fidx.copy()
                left[a] -= 1
                if ph[tuple(left)] >= 0 and ph[tuple(fidx)] >= 0:
                    continue
                mid = origin + (fidx + stag) * dx + reg.offset / 2.0
                grad = _seam_gradient(mid, a, left, fidx, reg, q, layout, phi, mode)
                u.comps[a][tuple(fidx)] -= grad
    return u


def _seam_gradient(mid, axis, cell_l, cell_r, reg, q, layout, phi, mode) -> float:
    """Axis component of grad q at a seam face midpoint via its element."""
    desc = layout.desc
    dx = desc.dx
    origin = np.asarray(desc.origin)
    key = tuple(np.floor((mid - origin) / dx).astype(int))
    for eid in layout.elem_locator.get(key, ()):
        el = layout.elements[eid]
        xi, ok = _newton_batch(el.node_pos, mid[None, :], dx)
        if not ok[0] or np.any(np.abs(xi[0]) > 1.0 + 1e-9):
            continue
        grads = shape_gradients(xi[0], desc.dim)      # (dim, nn)
        jacT = grads @ el.node_pos
        B = np.linalg.solve(jacT, grads)
        vals = _ghost_nodal_values(el, q.values, mode)
        return float((B @ vals)[axis])
    # no covering element (e.g. dropped all-air quad): fall back to a finite
    # difference between the two adjacent cell centers at their true positions
    in_l = reg.contains_cell(cell_l)
    in_r = reg.contains_cell(cell_r)
    pos_l = origin[axis] + (cell_l[axis] + 0.5) * dx + (reg.offset[axis] if in_l else 0.0)
    pos_r = origin[axis] + (cell_r[axis] + 0.5) * dx + (reg.offset[axis] if in_r else 0.0)
    ph = phi.values
    ql, qr = q.values[tuple(cell_l)], q.values[tuple(cell_r)]
    if ph[tuple(cell_l)] >= 0:
        ql = 0.0
    if ph[tuple(cell_r)] >= 0:
        qr = 0.0
    return float((qr - ql) / max(pos_r - pos_l, 1e-300))


def project_velocity(u_star: StaggeredVelocityField, q: ScalarField,
                     layout: HybridLayout, phi: ScalarField,
                     mode: str) -> StaggeredVelocityField:
    """u = u* - F grad q on liquid-adjacent faces; closed domain walls.

    Lattice faces difference the two adjacent cells; free-surface faces use the
    ghost-fluid factor; seam faces evaluate the elemental gradient.
    """
    _check_mode(mode)
    desc = layout.desc
    dx = desc.dx
    u = u_star.copy()
    ph = phi.values
    qv = q.values
    fclasses = layout.face_classes()
    for a in range(desc.dim):
        nfa = desc.shape[a] + 1
        inner = [slice(None)] * desc.dim
        inner[a] = slice(1, nfa - 1)
        lsl = [slice(None)] * desc.dim
        rsl = [slice(None)] * desc.dim
        lsl[a] = slice(0, desc.shape[a] - 1)
        rsl[a] = slice(1, desc.shape[a])
        phL, phR = ph[tuple(lsl)], ph[tuple(rsl)]
        qL, qR = qv[tuple(lsl)].copy(), qv[tuple(rsl)].copy()
        qL[phL >= 0] = 0.0
        qR[phR >= 0] = 0.0
        F = np.ones(phL.shape)
        if mode != FIRST_ORDER:
            lm = (phL < 0) & (phR >= 0)
            rm = (phR < 0) & (phL >= 0)
            F[lm] = 1.0 / _ghost_theta(phL[lm], phR[lm])
            F[rm] = 1.0 / _ghost_theta(phR[rm], phL[rm])
        wet = (phL < 0) | (phR < 0)
        lattice = fclasses[a][tuple(inner)] != HybridLayout.FACE_SEAM
        upd = wet & lattice
        comp = u.comps[a][tuple(inner)]
        comp[upd] -= (F * (qR - qL) / dx)[upd]
        # closed walls: no normal flow through the domain boundary
        first = [slice(None)] * desc.dim
        last = [slice(None)] * desc.dim
        first[a] = 0
        last[a] = nfa - 1
        u.comps[a][tuple(first)] = 0.0
        u.comps[a][tuple(last)] = 0.0
    if layout.regions:
        u = _project_seam_faces(u, q, layout, phi, mode)
    return u


def divergence(u: StaggeredVelocityField, layout: HybridLayout,
               phi: ScalarField) -> np.ndarray:
    """Control-volume-weighted divergence per liquid cell (same operator as the
    solve rhs); air cells report zero."""
    desc = layout.desc
    dx = desc.dx
    fracs = liquid_fraction_faces(phi)
    out = np.zeros(desc.shape)
    for a in range(desc.dim):
        nfa = desc.shape[a] + 1
        inner = [slice(None)] * desc.dim
        inner[a] = slice(1, nfa - 1)
        lsl = [slice(None)] * desc.dim
        rsl = [slice(None)] * desc.dim
        lsl[a] = slice(0, desc.shape[a] - 1)
        rsl[a] = slice(1, desc.shape[a])
        ap = layout.face_aperture[a][tuple(inner)]
        flux = ap * fracs[a][tuple(inner)] * u.comps[a][tuple(inner)]
        out[tuple(lsl)] += flux
        out[tuple(rsl)] -= flux
    out[phi.values >= 0] = 0.0
    vol = np.maximum(layout.control_volume, 1e-3 * dx ** desc.dim)
    return out / vol
