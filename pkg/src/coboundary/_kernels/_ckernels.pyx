# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``; same signatures."""
import numpy as np


def cauchy_matmul(double complex[:, :, :, ::1] u, double complex[:, :, :, ::1] v):
    cdef Py_ssize_t J = u.shape[0], P = u.shape[1], n = u.shape[2]
    cdef Py_ssize_t a, b, p, i, j, l
    cdef double complex s
    out_arr = np.zeros((J, P, n, n), dtype=np.complex128)
    cdef double complex[:, :, :, ::1] out = out_arr
    with nogil:
        for a in range(J):
            for b in range(J - a):
                for p in range(P):
                    for i in range(n):
                        for j in range(n):
                            s = 0
                            for l in range(n):
                                s = s + u[a, p, i, l] * v[b, p, l, j]
                            out[a + b, p, i, j] += s
    return out_arr


def series_inverse(double complex[:, :, :, ::1] u, double complex[:, :, ::1] w0):
    cdef Py_ssize_t J = u.shape[0], P = u.shape[1], n = u.shape[2]
    cdef Py_ssize_t jj, k, p, i, j, l, m
    cdef double complex s
    w_arr = np.zeros((J, P, n, n), dtype=np.complex128)
    acc_arr = np.zeros((P, n, n), dtype=np.complex128)
    cdef double complex[:, :, :, ::1] w = w_arr
    cdef double complex[:, :, ::1] acc = acc_arr
    with nogil:
        for p in range(P):
            for i in range(n):
                for j in range(n):
                    w[0, p, i, j] = w0[p, i, j]
        for jj in range(1, J):
            for p in range(P):
                for i in range(n):
                    for j in range(n):
                        s = 0
                        for k in range(1, jj + 1):
                            for l in range(n):
                                s = s + u[k, p, i, l] * w[jj - k, p, l, j]
                        acc[p, i, j] = s
                for i in range(n):
                    for j in range(n):
                        s = 0
                        for m in range(n):
                            s = s + w0[p, i, m] * acc[p, m, j]
                        w[jj, p, i, j] = -s
    return w_arr


def orbit_product(double complex[:, :, :, ::1] vals):
    cdef Py_ssize_t B = vals.shape[0], N = vals.shape[1], n = vals.shape[2]
    cdef Py_ssize_t b, t, i, j, l
    cdef double complex s
    out_arr = np.array(vals[:, 0], dtype=np.complex128, order="C")
    tmp_arr = np.zeros((n, n), dtype=np.complex128)
    cdef double complex[:, :, ::1] out = out_arr
    cdef double complex[:, ::1] tmp = tmp_arr
    with nogil:
        for b in range(B):
            for t in range(1, N):
                for i in range(n):
                    for j in range(n):
                        s = 0
                        for l in range(n):
                            s = s + vals[b, t, i, l] * out[b, l, j]
                        tmp[i, j] = s
                for i in range(n):
                    for j in range(n):
                        out[b, i, j] = tmp[i, j]
    return out_arr
