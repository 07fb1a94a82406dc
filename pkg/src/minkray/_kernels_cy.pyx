# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ray quadrature kernels for 4-dimensional grids (n = 3)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

BACKEND = "cython"


cdef inline double _interp4(const double[:, :, :, ::1] g,
                            double x0, double x1, double x2, double x3) nogil:
    cdef Py_ssize_t n0 = g.shape[0], n1 = g.shape[1], n2 = g.shape[2], n3 = g.shape[3]
    cdef double f0 = floor(x0), f1 = floor(x1), f2 = floor(x2), f3 = floor(x3)
    cdef Py_ssize_t i0 = <Py_ssize_t>f0, i1 = <Py_ssize_t>f1
    cdef Py_ssize_t i2 = <Py_ssize_t>f2, i3 = <Py_ssize_t>f3
    if i0 < -1 or i0 > n0 - 1 or i1 < -1 or i1 > n1 - 1:
        return 0.0
    if i2 < -1 or i2 > n2 - 1 or i3 < -1 or i3 > n3 - 1:
        return 0.0
    cdef double t0 = x0 - f0, t1 = x1 - f1, t2 = x2 - f2, t3 = x3 - f3
    cdef double w0[2]
    cdef double w1[2]
    cdef double w2[2]
    cdef double w3[2]
    w0[0] = 1.0 - t0; w0[1] = t0
    w1[0] = 1.0 - t1; w1[1] = t1
    w2[0] = 1.0 - t2; w2[1] = t2
    w3[0] = 1.0 - t3; w3[1] = t3
    cdef double acc = 0.0, wa, wb, wc
    cdef Py_ssize_t d0, d1, d2, d3, j0, j1, j2, j3
    for d0 in range(2):
        j0 = i0 + d0
        if j0 < 0 or j0 >= n0 or w0[d0] == 0.0:
            continue
        for d1 in range(2):
            j1 = i1 + d1
            if j1 < 0 or j1 >= n1 or w1[d1] == 0.0:
                continue
            wa = w0[d0] * w1[d1]
            for d2 in range(2):
                j2 = i2 + d2
                if j2 < 0 or j2 >= n2 or w2[d2] == 0.0:
                    continue
                wb = wa * w2[d2]
                for d3 in range(2):
                    j3 = i3 + d3
                    if j3 < 0 or j3 >= n3 or w3[d3] == 0.0:
                        continue
                    acc += wb * w3[d3] * g[j0, j1, j2, j3]
    return acc


def interpolate(double[:, :, :, ::1] values, double[:, ::1] points):
    """Multilinear interpolation at fractional indices, zero outside."""
    cdef Py_ssize_t npts = points.shape[0]
    out_arr = np.empty(npts)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t r
    with nogil:
        for r in range(npts):
            out[r] = _interp4(values, points[r, 0], points[r, 1], points[r, 2], points[r, 3])
    return out_arr


def ray_sums(double[:, :, :, ::1] values, double[:, ::1] starts,
             double[::1] step, Py_ssize_t nsteps, double s_step):
    """Trapezoid quadrature along parallel rays; see the python fallback."""
    cdef Py_ssize_t nrays = starts.shape[0]
    out_arr = np.empty(nrays)
    cdef double[::1] out = out_arr
    cdef double d0 = step[0], d1 = step[1], d2 = step[2], d3 = step[3]
    cdef double x0, x1, x2, x3, acc
    cdef Py_ssize_t r, k
    with nogil:
        for r in range(nrays):
            x0 = starts[r, 0]; x1 = starts[r, 1]; x2 = starts[r, 2]; x3 = starts[r, 3]
            acc = 0.5 * _interp4(values, x0, x1, x2, x3)
            for k in range(1, nsteps):
                x0 += d0; x1 += d1; x2 += d2; x3 += d3
                acc += _interp4(values, x0, x1, x2, x3)
            x0 += d0; x1 += d1; x2 += d2; x3 += d3
            acc += 0.5 * _interp4(values, x0, x1, x2, x3)
            out[r] = acc * s_step
    return out_arr
