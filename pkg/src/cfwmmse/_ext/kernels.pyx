# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for effective-gain and hardening-moment accumulation."""

import numpy as np


def effective_gains(const double complex[:, :, :, ::1] g, const double complex[:, :, :, ::1] q):
    """x[n, k, j, m] = g[n, m, k]^H q[n, m, j]."""
    cdef Py_ssize_t n = g.shape[0], M = g.shape[1], K = g.shape[2], L = g.shape[3]
    cdef Py_ssize_t J = q.shape[2]
    out = np.empty((n, K, J, M), dtype=np.complex128)
    cdef double complex[:, :, :, ::1] x = out
    cdef Py_ssize_t i, m, k, j, l
    cdef double gr, gi, qr, qi, ar, ai
    with nogil:
        for i in range(n):
            for m in range(M):
                for k in range(K):
                    for j in range(J):
                        ar = 0.0
                        ai = 0.0
                        for l in range(L):
                            gr = g[i, m, k, l].real
                            gi = g[i, m, k, l].imag
                            qr = q[i, m, j, l].real
                            qi = q[i, m, j, l].imag
                            ar = ar + gr * qr + gi * qi
                            ai = ai + gr * qi - gi * qr
                        x[i, k, j, m] = ar + 1j * ai
    return out


def moment_sums(const double complex[:, :, :, ::1] x):
    """Sums over the leading axis of x[k, k, m] and Re(x[k, j, l] conj(x[k, j, m]))."""
    cdef Py_ssize_t n = x.shape[0], K = x.shape[1], J = x.shape[2], M = x.shape[3]
    d_out = np.zeros((M, K), dtype=np.complex128)
    b_out = np.zeros((K, J, M, M), dtype=np.float64)
    cdef double complex[:, ::1] d = d_out
    cdef double[:, :, :, ::1] b = b_out
    cdef Py_ssize_t i, k, j, l, m
    cdef double xr, xi
    with nogil:
        for i in range(n):
            for k in range(K):
                if k < J:
                    for m in range(M):
                        d[m, k] = d[m, k] + x[i, k, k, m]
                for j in range(J):
                    for l in range(M):
                        xr = x[i, k, j, l].real
                        xi = x[i, k, j, l].imag
                        if xr == 0.0 and xi == 0.0:
                            continue
                        for m in range(l, M):
                            b[k, j, l, m] = b[k, j, l, m] + xr * x[i, k, j, m].real + xi * x[i, k, j, m].imag
        for k in range(K):
            for j in range(J):
                for l in range(M):
                    for m in range(l + 1, M):
                        b[k, j, m, l] = b[k, j, l, m]
    return d_out, b_out
