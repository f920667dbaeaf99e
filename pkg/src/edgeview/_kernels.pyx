# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner kernels; see ``_kernels_py`` for the reference versions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, cos, sin, sqrt, fabs, hypot

cnp.import_array()

cdef double SQRT2 = sqrt(2.0)


def svec_rows(G):
    cdef double[:, ::1] g = np.ascontiguousarray(G, dtype=np.float64)
    cdef Py_ssize_t N = g.shape[0], K = g.shape[1]
    cdef Py_ssize_t D = K * (K + 1) // 2
    out = np.empty((N, D), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t n, i, j, c
    for n in range(N):
        c = 0
        for j in range(K):
            for i in range(j + 1):
                if i == j:
                    o[n, c] = g[n, i] * g[n, i]
                else:
                    o[n, c] = SQRT2 * g[n, i] * g[n, j]
                c += 1
    return out


def joint_diagonalize(mats, double tol=1e-10, int max_sweeps=100):
    arr = np.array(mats, dtype=np.float64, order="C", copy=True)
    cdef double[:, :, ::1] A = arr
    cdef Py_ssize_t m = A.shape[0], n = A.shape[1]
    Vnp = np.eye(n)
    cdef double[:, ::1] V = Vnp
    cdef Py_ssize_t k, p, q, i
    cdef double g1, g2, s11, s22, s12, ton, toff, theta, c, s, biggest
    cdef double ap, aq, total = 0.0, diag, offdiag = 0.0
    cdef int sweeps = 0
    cdef bint converged = False

    for k in range(m):
        for p in range(n):
            for q in range(n):
                total += A[k, p, q] * A[k, p, q]
    if total == 0.0:
        total = 1.0

    while sweeps < max_sweeps:
        sweeps += 1
        biggest = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                s11 = 0.0
                s22 = 0.0
                s12 = 0.0
                for k in range(m):
                    g1 = A[k, p, p] - A[k, q, q]
                    g2 = A[k, p, q] + A[k, q, p]
                    s11 += g1 * g1
                    s22 += g2 * g2
                    s12 += g1 * g2
                ton = s11 - s22
                toff = 2.0 * s12
                theta = 0.5 * atan2(toff, ton + hypot(ton, toff))
                c = cos(theta)
                s = sin(theta)
                if fabs(s) > biggest:
                    biggest = fabs(s)
                if fabs(s) <= tol:
                    continue
                for k in range(m):
                    for i in range(n):
                        ap = A[k, i, p]
                        aq = A[k, i, q]
                        A[k, i, p] = c * ap + s * aq
                        A[k, i, q] = c * aq - s * ap
                    for i in range(n):
                        ap = A[k, p, i]
                        aq = A[k, q, i]
                        A[k, p, i] = c * ap + s * aq
                        A[k, q, i] = c * aq - s * ap
                for i in range(n):
                    ap = V[i, p]
                    aq = V[i, q]
                    V[i, p] = c * ap + s * aq
                    V[i, q] = c * aq - s * ap
        offdiag = 0.0
        for k in range(m):
            for p in range(n):
                for q in range(n):
                    if p != q:
                        offdiag += A[k, p, q] * A[k, p, q]
        offdiag = sqrt(offdiag / total)
        if biggest <= tol or offdiag <= tol:
            converged = True
            break
    return Vnp, sweeps, offdiag, converged
