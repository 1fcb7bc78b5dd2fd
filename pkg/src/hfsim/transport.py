"""Semi-Lagrangian transport and velocity extrapolation.

Quantities live on post-step lattice positions (window offsets applied) and are
backtraced through the pre-step velocity field with a single Euler step.  A
feature co-moving with its window is reproduced exactly because target and
source positions translate together.
"""

from __future__ import annotations

import numpy as np

from .grid import ScalarField, StaggeredVelocityField
from .interp import CellSampler, FaceSampler
from .regions import HybridLayout

EXTRAPOLATION_LAYERS = 4


def semi_lagrangian(sample_fn, bounds_fn, targets: np.ndarray,
                    velocities: np.ndarray, dt: float) -> np.ndarray:
    """Backtrace targets by dt through the given velocities and sample.

    Results are clamped to the stored-value range around each departure point,
    which keeps the scheme monotone.
    """
    back = targets - dt * velocities
    vals = sample_fn(back)
    lo, hi = bounds_fn(back)
    return np.clip(vals, lo, hi)


def advect_scalar_cells(field: ScalarField, u: StaggeredVelocityField,
                        layout_old: HybridLayout, layout_new: HybridLayout,
                        dt: float) -> ScalarField:
    """Advect a cell-centered field onto the post-step cell positions."""
    desc = field.desc
    sampler = CellSampler(field, layout_old)
    vel = FaceSampler(u, layout_old)
    targets = layout_new.cell_positions().reshape(-1, desc.dim)
    vals = semi_lagrangian(sampler, sampler.bounds, targets,
                           vel.velocity(targets), dt)
    out = field.copy()
    out.values = np.ascontiguousarray(vals.reshape(desc.shape))
    return out


def advect_velocity(u: StaggeredVelocityField, layout_old: HybridLayout,
                    layout_new: HybridLayout, dt: float) -> StaggeredVelocityField:
    """Advect each velocity component onto the post-step face positions."""
    desc = u.desc
    vel = FaceSampler(u, layout_old)
    out = u.copy()
    for a in range(desc.dim):
        targets = layout_new.face_positions(a).reshape(-1, desc.dim)
        vals = semi_lagrangian(lambda p, a=a: vel.sample(p, a),
                               lambda p, a=a: vel.bounds(p, a),
                               targets, vel.velocity(targets), dt)
        out.comps[a] = np.ascontiguousarray(vals.reshape(desc.face_shape(a)))
    return out


def _shifted(arr: np.ndarray, axis: int, step: int) -> np.ndarray:
    """Edge-padded neighbor view along one axis."""
    n = arr.shape[axis]
    if step == 1:
        idx = list(range(1, n)) + [n - 1]
    else:
        idx = [0] + list(range(0, n - 1))
    return np.take(arr, idx, axis=axis)


def extrapolate_velocity(u: StaggeredVelocityField, phi: ScalarField,
                         layers: int = EXTRAPOLATION_LAYERS) -> StaggeredVelocityField:
    """Propagate face velocities from liquid-adjacent faces into the air.

    Breadth-first layers: each sweep fills undefined faces that have at least
    one defined axis neighbor with the neighbor average.
    """
    desc = u.desc
    liquid = phi.values < 0
    out = u.copy()
    for a in range(desc.dim):
        comp = out.comps[a]
        pad_l = np.concatenate([np.take(liquid, [0], axis=a) & False, liquid], axis=a)
        pad_r = np.concatenate([liquid, np.take(liquid, [-1], axis=a) & False], axis=a)
        defined = pad_l | pad_r
        comp[~defined] = 0.0
        for _ in range(layers):
            cnt = np.zeros(comp.shape)
            acc = np.zeros(comp.shape)
            for b in range(desc.dim):
                for step in (-1, 1):
                    nb_def = _shifted(defined, b, step)
                    acc += _shifted(np.where(defined, comp, 0.0), b, step)
                    cnt += nb_def
            new = ~defined & (cnt > 0)
            comp[new] = acc[new] / cnt[new]
            defined |= new
        out.comps[a] = comp
    return out
