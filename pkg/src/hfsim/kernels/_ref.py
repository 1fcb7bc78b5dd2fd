"""Pure-NumPy reference implementations of the hot kernels.

Used as the fallback backend when the compiled extension is unavailable,
and as the oracle the compiled kernels are tested against.
"""

from __future__ import annotations

import numpy as np


def sample_multilinear(values: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Multilinear sampling on a node lattice.

    values[i,j(,k)] lives at fractional coordinate (i,j(,k)).  coords is
    (n, dim), clamped to the lattice, so boundary queries replicate edges.
    """
    dim = values.ndim
    coords = np.asarray(coords, dtype=np.float64)
    out = np.zeros(len(coords))
    i0 = np.empty((len(coords), dim), dtype=np.intp)
    frac = np.empty((len(coords), dim))
    for a in range(dim):
        c = np.clip(coords[:, a], 0.0, values.shape[a] - 1.0)
        f = np.floor(c)
        f = np.minimum(f, values.shape[a] - 2) if values.shape[a] > 1 else f * 0
        i0[:, a] = f.astype(np.intp)
        frac[:, a] = c - f
    for corner in range(1 << dim):
        w = np.ones(len(coords))
        idx = []
        for a in range(dim):
            bit = (corner >> a) & 1
            w = w * (frac[:, a] if bit else 1.0 - frac[:, a])
            idx.append(np.minimum(i0[:, a] + bit, values.shape[a] - 1))
        out += w * values[tuple(idx)]
    return out


def reinit_godunov(phi, pos_mask, dtau_s, dx, update_mask):
    """One Godunov upwind pseudo-time step of |grad phi| = 1.

    pos_mask selects the phi0>0 upwind branch; dtau_s = dtau * smoothed sign.
    Cells outside update_mask are returned unchanged.
    """
    dim = phi.ndim
    grad2 = np.zeros_like(phi)
    for a in range(dim):
        nxt = np.concatenate([np.take(phi, range(1, phi.shape[a]), axis=a),
                              np.take(phi, [-1], axis=a)], axis=a)
        prv = np.concatenate([np.take(phi, [0], axis=a),
                              np.take(phi, range(0, phi.shape[a] - 1), axis=a)], axis=a)
        fwd = (nxt - phi) / dx
        bwd = (phi - prv) / dx
        up_pos = np.maximum(np.maximum(bwd, 0.0) ** 2, np.minimum(fwd, 0.0) ** 2)
        up_neg = np.maximum(np.minimum(bwd, 0.0) ** 2, np.maximum(fwd, 0.0) ** 2)
        grad2 += np.where(pos_mask, up_pos, up_neg)
    g = np.sqrt(grad2)
    return np.where(update_mask, phi - dtau_s * (g - 1.0), phi)
