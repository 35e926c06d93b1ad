# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled mesh kernel; see ``_pykernel`` for the contract."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def cell_moduli(const double complex[:, ::1] H):
    cdef Py_ssize_t nr = H.shape[0], nt = H.shape[1]
    cdef Py_ssize_t i, j, jp
    out = np.empty((nr - 1, nt), dtype=np.float64)
    cdef double[:, ::1] M = out
    cdef double[:, ::1] A = np.empty((nr, nt), dtype=np.float64)
    cdef double complex z
    for i in range(nr):
        for j in range(nt):
            z = H[i, j]
            A[i, j] = sqrt(z.real * z.real + z.imag * z.imag)
    for i in range(nr - 1):
        for j in range(nt):
            jp = j + 1 if j + 1 < nt else 0
            M[i, j] = 0.25 * (A[i, j] + A[i + 1, j] + A[i, jp] + A[i + 1, jp])
    return out


def assemble(const double complex[:, ::1] H, const double[:, ::1] w,
             const double[:, ::1] dw, double cx, double ct):
    cdef Py_ssize_t nr = H.shape[0], nt = H.shape[1]
    cdef Py_ssize_t i, j, jp
    G_arr = np.zeros((nr, nt), dtype=np.complex128)
    cdef double complex[:, ::1] G = G_arr
    cdef double[:, ::1] A = np.empty((nr, nt), dtype=np.float64)
    cdef double complex z, a, b, c, d, h00, h10, h01, h11
    cdef double D, wd, ww, E = 0.0
    cdef double complex u00, u10, u01, u11
    for i in range(nr):
        for j in range(nt):
            z = H[i, j]
            A[i, j] = sqrt(z.real * z.real + z.imag * z.imag)
    for i in range(nr - 1):
        for j in range(nt):
            jp = j + 1 if j + 1 < nt else 0
            h00 = H[i, j]
            h10 = H[i + 1, j]
            h01 = H[i, jp]
            h11 = H[i + 1, jp]
            a = h10 - h00
            b = h11 - h01
            c = h01 - h00
            d = h11 - h10
            D = (cx * (a.real * a.real + a.imag * a.imag + b.real * b.real + b.imag * b.imag)
                 + ct * (c.real * c.real + c.imag * c.imag + d.real * d.real + d.imag * d.imag))
            ww = w[i, j]
            E += ww * D
            wd = 0.25 * D * dw[i, j]
            u00 = h00 / A[i, j] if A[i, j] > 0 else 0.0
            u10 = h10 / A[i + 1, j] if A[i + 1, j] > 0 else 0.0
            u01 = h01 / A[i, jp] if A[i, jp] > 0 else 0.0
            u11 = h11 / A[i + 1, jp] if A[i + 1, jp] > 0 else 0.0
            G[i, j] += -2.0 * ww * (cx * a + ct * c) + wd * u00
            G[i + 1, j] += 2.0 * ww * (cx * a - ct * d) + wd * u10
            G[i, jp] += 2.0 * ww * (ct * c - cx * b) + wd * u01
            G[i + 1, jp] += 2.0 * ww * (cx * b + ct * d) + wd * u11
    return E, G_arr
