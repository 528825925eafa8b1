# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled RK4 stepper for ``dy/dt = sum_m e^{i nu_m t} M_m y`` with CSR terms."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


cdef void _matvec(
    const cnp.int64_t[:, ::1] indptr,
    const cnp.int64_t[::1] indices,
    const double complex[::1] data,
    const double[::1] nus,
    double t,
    const double complex[:, ::1] x,
    double complex[:, ::1] out,
) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0], r = x.shape[1], nterms = indptr.shape[0]
    cdef Py_ssize_t m, i, p, j, k
    cdef double complex c, v
    for i in range(n):
        for k in range(r):
            out[i, k] = 0
    for m in range(nterms):
        c = cos(nus[m] * t) + 1j * sin(nus[m] * t)
        for i in range(n):
            for p in range(indptr[m, i], indptr[m, i + 1]):
                j = indices[p]
                v = c * data[p]
                for k in range(r):
                    out[i, k] = out[i, k] + v * x[j, k]


def rk4_advance(
    cnp.int64_t[:, ::1] indptr,
    cnp.int64_t[::1] indices,
    double complex[::1] data,
    double[::1] nus,
    double complex[:, ::1] y,
    double t0,
    double h,
    Py_ssize_t nsteps,
):
    """Advance ``y`` in place by ``nsteps`` RK4 steps of size ``h`` from ``t0``."""
    cdef Py_ssize_t n = y.shape[0], r = y.shape[1]
    cdef double complex[:, ::1] k1 = np.empty((n, r), dtype=np.complex128)
    cdef double complex[:, ::1] k2 = np.empty((n, r), dtype=np.complex128)
    cdef double complex[:, ::1] k3 = np.empty((n, r), dtype=np.complex128)
    cdef double complex[:, ::1] k4 = np.empty((n, r), dtype=np.complex128)
    cdef double complex[:, ::1] tmp = np.empty((n, r), dtype=np.complex128)
    cdef Py_ssize_t s, i, k
    cdef double t
    cdef double h2 = 0.5 * h, h6 = h / 6.0
    with nogil:
        for s in range(nsteps):
            t = t0 + s * h
            _matvec(indptr, indices, data, nus, t, y, k1)
            for i in range(n):
                for k in range(r):
                    tmp[i, k] = y[i, k] + h2 * k1[i, k]
            _matvec(indptr, indices, data, nus, t + h2, tmp, k2)
            for i in range(n):
                for k in range(r):
                    tmp[i, k] = y[i, k] + h2 * k2[i, k]
            _matvec(indptr, indices, data, nus, t + h2, tmp, k3)
            for i in range(n):
                for k in range(r):
                    tmp[i, k] = y[i, k] + h * k3[i, k]
            _matvec(indptr, indices, data, nus, t + h, tmp, k4)
            for i in range(n):
                for k in range(r):
                    y[i, k] = y[i, k] + h6 * (k1[i, k] + 2 * k2[i, k] + 2 * k3[i, k] + k4[i, k])
