# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot per-point kernels (see _ref.py for the oracle)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def sample_multilinear(values, coords):
    values = np.ascontiguousarray(values, dtype=np.float64)
    coords = np.ascontiguousarray(coords, dtype=np.float64)
    if values.ndim == 2:
        return _sample_bilinear_2d(values, coords)
    elif values.ndim == 3:
        return _sample_trilinear_3d(values, coords)
    raise ValueError("values must be 2D or 3D")


cdef _sample_bilinear_2d(double[:, ::1] v, double[:, ::1] c):
    cdef Py_ssize_t n = c.shape[0]
    cdef Py_ssize_t nx = v.shape[0], ny = v.shape[1]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t p, i0, j0
    cdef double x, y, fx, fy
    for p in range(n):
        x = c[p, 0]
        y = c[p, 1]
        if x < 0: x = 0
        if x > nx - 1: x = nx - 1
        if y < 0: y = 0
        if y > ny - 1: y = ny - 1
        i0 = <Py_ssize_t>x
        j0 = <Py_ssize_t>y
        if i0 > nx - 2: i0 = nx - 2
        if j0 > ny - 2: j0 = ny - 2
        fx = x - i0
        fy = y - j0
        out[p] = ((1 - fx) * (1 - fy) * v[i0, j0]
                  + fx * (1 - fy) * v[i0 + 1, j0]
                  + (1 - fx) * fy * v[i0, j0 + 1]
                  + fx * fy * v[i0 + 1, j0 + 1])
    return out_arr


cdef _sample_trilinear_3d(double[:, :, ::1] v, double[:, ::1] c):
    cdef Py_ssize_t n = c.shape[0]
    cdef Py_ssize_t nx = v.shape[0], ny = v.shape[1], nz = v.shape[2]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t p, i0, j0, k0
    cdef double x, y, z, fx, fy, fz, c00, c01, c10, c11, c0, c1
    for p in range(n):
        x = c[p, 0]; y = c[p, 1]; z = c[p, 2]
        if x < 0: x = 0
        if x > nx - 1: x = nx - 1
        if y < 0: y = 0
        if y > ny - 1: y = ny - 1
        if z < 0: z = 0
        if z > nz - 1: z = nz - 1
        i0 = <Py_ssize_t>x; j0 = <Py_ssize_t>y; k0 = <Py_ssize_t>z
        if i0 > nx - 2: i0 = nx - 2
        if j0 > ny - 2: j0 = ny - 2
        if k0 > nz - 2: k0 = nz - 2
        fx = x - i0; fy = y - j0; fz = z - k0
        c00 = v[i0, j0, k0] * (1 - fx) + v[i0 + 1, j0, k0] * fx
        c10 = v[i0, j0 + 1, k0] * (1 - fx) + v[i0 + 1, j0 + 1, k0] * fx
        c01 = v[i0, j0, k0 + 1] * (1 - fx) + v[i0 + 1, j0, k0 + 1] * fx
        c11 = v[i0, j0 + 1, k0 + 1] * (1 - fx) + v[i0 + 1, j0 + 1, k0 + 1] * fx
        c0 = c00 * (1 - fy) + c10 * fy
        c1 = c01 * (1 - fy) + c11 * fy
        out[p] = c0 * (1 - fz) + c1 * fz
    return out_arr


def reinit_godunov(phi, pos_mask, dtau_s, dx, update_mask):
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    pos = np.ascontiguousarray(pos_mask, dtype=np.uint8)
    upd = np.ascontiguousarray(update_mask, dtype=np.uint8)
    dts = np.ascontiguousarray(dtau_s, dtype=np.float64)
    if phi.ndim == 2:
        return _reinit_2d(phi, pos, dts, float(dx), upd)
    from . import _ref
    return _ref.reinit_godunov(phi, pos_mask, dtau_s, dx, update_mask)


cdef _reinit_2d(double[:, ::1] phi, cnp.uint8_t[:, ::1] pos,
                double[:, ::1] dts, double dx, cnp.uint8_t[:, ::1] upd):
    cdef Py_ssize_t nx = phi.shape[0], ny = phi.shape[1]
    out_arr = np.empty((nx, ny))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double fwd, bwd, a, b, g2, g
    for i in range(nx):
        for j in range(ny):
            if not upd[i, j]:
                out[i, j] = phi[i, j]
                continue
            g2 = 0
            # x direction
            fwd = ((phi[i + 1, j] if i + 1 < nx else phi[i, j]) - phi[i, j]) / dx
            bwd = (phi[i, j] - (phi[i - 1, j] if i > 0 else phi[i, j])) / dx
            if pos[i, j]:
                a = bwd if bwd > 0 else 0
                b = fwd if fwd < 0 else 0
            else:
                a = bwd if bwd < 0 else 0
                b = fwd if fwd > 0 else 0
            g2 += a * a if a * a > b * b else b * b
            # y direction
            fwd = ((phi[i, j + 1] if j + 1 < ny else phi[i, j]) - phi[i, j]) / dx
            bwd = (phi[i, j] - (phi[i, j - 1] if j > 0 else phi[i, j])) / dx
            if pos[i, j]:
                a = bwd if bwd > 0 else 0
                b = fwd if fwd < 0 else 0
            else:
                a = bwd if bwd < 0 else 0
                b = fwd if fwd > 0 else 0
            g2 += a * a if a * a > b * b else b * b
            g = g2 ** 0.5
            out[i, j] = phi[i, j] - dts[i, j] * (g - 1.0)
    return out_arr
