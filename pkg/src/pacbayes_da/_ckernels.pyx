# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled loops over voter sign tables."""
import numpy as np

cimport numpy as cnp


def voter_risks(const signed char[:, ::1] table, const double[::1] w_pos, const double[::1] w_neg):
    cdef Py_ssize_t n = table.shape[0], npts = table.shape[1], i, k
    cdef double s
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] r = out
    for i in range(n):
        s = 0.0
        for k in range(npts):
            if table[i, k] < 0:
                s += w_pos[k]
            else:
                s += w_neg[k]
        r[i] = s
    return out


def disagreement_matrix(const signed char[:, ::1] table, const double[::1] w):
    cdef Py_ssize_t n = table.shape[0], npts = table.shape[1], i, j, k
    cdef double s
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] m = out
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                s = 0.0
                for k in range(npts):
                    if table[i, k] != table[j, k]:
                        s += w[k]
                m[i, j] = s
                m[j, i] = s
    return out


def joint_error_matrix(const signed char[:, ::1] table, const double[::1] w_pos, const double[::1] w_neg):
    cdef Py_ssize_t n = table.shape[0], npts = table.shape[1], i, j, k
    cdef double s
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] e = out
    with nogil:
        for i in range(n):
            for j in range(i, n):
                s = 0.0
                for k in range(npts):
                    if table[i, k] == table[j, k]:
                        if table[i, k] < 0:
                            s += w_pos[k]
                        else:
                            s += w_neg[k]
                e[i, j] = s
                e[j, i] = s
    return out


def quadratic_form(const double[:, ::1] mat, const double[::1] a, const double[::1] b):
    cdef Py_ssize_t n = mat.shape[0], i, j
    cdef double s = 0.0, row
    for i in range(n):
        if a[i] == 0.0:
            continue
        row = 0.0
        for j in range(n):
            row += mat[i, j] * b[j]
        s += a[i] * row
    return s
