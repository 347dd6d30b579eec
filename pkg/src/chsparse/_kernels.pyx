# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled block-tridiagonal kernels (3x3 blocks).

The 1D three-field systems are stored node-interleaved, which makes every
implicit step a block-tridiagonal solve. ``btd_factor`` performs the block
Thomas elimination once; ``btd_solve`` reuses it for any number of
right-hand sides.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef int _inv3(double[:, :] a, double[:, :] out) noexcept nogil:
    # Gauss-Jordan with partial pivoting on the augmented [a | I].
    cdef double m[3][6]
    cdef int i, j, k, piv
    cdef double best, tmp, f
    for i in range(3):
        for j in range(3):
            m[i][j] = a[i, j]
            m[i][j + 3] = 1.0 if i == j else 0.0
    for k in range(3):
        piv = k
        best = fabs(m[k][k])
        for i in range(k + 1, 3):
            if fabs(m[i][k]) > best:
                best = fabs(m[i][k])
                piv = i
        if best == 0.0:
            return -1
        if piv != k:
            for j in range(6):
                tmp = m[k][j]
                m[k][j] = m[piv][j]
                m[piv][j] = tmp
        f = 1.0 / m[k][k]
        for j in range(6):
            m[k][j] *= f
        for i in range(3):
            if i != k:
                f = m[i][k]
                if f != 0.0:
                    for j in range(6):
                        m[i][j] -= f * m[k][j]
    for i in range(3):
        for j in range(3):
            out[i, j] = m[i][j + 3]
    return 0


def btd_factor(double[:, :, :] lower, double[:, :, :] diag, double[:, :, :] upper):
    """Factor a block-tridiagonal matrix; returns the opaque tuple ``(G, C, L)``."""
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i, a, b, c
    cdef double acc
    G_arr = np.empty((n, 3, 3))
    C_arr = np.zeros((n, 3, 3))
    L_arr = np.array(lower, copy=True)
    S_arr = np.empty((3, 3))
    cdef double[:, :, :] G = G_arr
    cdef double[:, :, :] C = C_arr
    cdef double[:, :] S = S_arr
    cdef int status = 0
    with nogil:
        for i in range(n):
            for a in range(3):
                for b in range(3):
                    acc = diag[i, a, b]
                    if i > 0:
                        for c in range(3):
                            acc = acc - lower[i, a, c] * C[i - 1, c, b]
                    S[a, b] = acc
            status = _inv3(S, G[i])
            if status != 0:
                break
            if i < n - 1:
                for a in range(3):
                    for b in range(3):
                        acc = 0.0
                        for c in range(3):
                            acc = acc + G[i, a, c] * upper[i, c, b]
                        C[i, a, b] = acc
    if status != 0:
        raise np.linalg.LinAlgError("singular pivot block in block-tridiagonal factorization")
    return G_arr, C_arr, L_arr


def btd_solve(factor, double[:, :] rhs):
    """Solve with a factor from :func:`btd_factor`; ``rhs`` has shape (n, 3)."""
    cdef double[:, :, :] G = factor[0]
    cdef double[:, :, :] C = factor[1]
    cdef double[:, :, :] L = factor[2]
    cdef Py_ssize_t n = G.shape[0]
    cdef Py_ssize_t i, a, c
    cdef double acc
    cdef double t[3]
    x_arr = np.empty((n, 3))
    cdef double[:, :] x = x_arr
    with nogil:
        for i in range(n):
            for a in range(3):
                t[a] = rhs[i, a]
                if i > 0:
                    for c in range(3):
                        t[a] = t[a] - L[i, a, c] * x[i - 1, c]
            for a in range(3):
                acc = 0.0
                for c in range(3):
                    acc = acc + G[i, a, c] * t[c]
                x[i, a] = acc
        for i in range(n - 2, -1, -1):
            for a in range(3):
                acc = x[i, a]
                for c in range(3):
                    acc = acc - C[i, a, c] * x[i + 1, c]
                x[i, a] = acc
    return x_arr
