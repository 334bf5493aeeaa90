# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled banded kernels. Same signatures and storage as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def band_matvec(const double[:, ::1] bands, const double[::1] x):
    cdef Py_ssize_t p1 = bands.shape[0], n = bands.shape[1]
    cdef Py_ssize_t i, k
    cdef double v
    out = np.empty(n)
    cdef double[::1] y = out
    for i in range(n):
        y[i] = bands[0, i] * x[i]
    for k in range(1, p1):
        for i in range(k, n):
            v = bands[k, i]
            y[i] += v * x[i - k]
            y[i - k] += v * x[i]
    return out


def band_ldlt(const double[:, ::1] bands, double pivot_tol):
    cdef Py_ssize_t p1 = bands.shape[0], n = bands.shape[1]
    cdef Py_ssize_t p = p1 - 1
    cdef Py_ssize_t i, j, m, jlo, bad = -1
    cdef double s, lim
    lb = np.zeros((p1, n))
    dd = np.zeros(n)
    cdef double[:, ::1] L = lb
    cdef double[::1] d = dd
    for i in range(n):
        jlo = i - p if i > p else 0
        for j in range(jlo, i):
            s = bands[i - j, i]
            for m in range(jlo, j):
                s -= L[i - m, i] * d[m] * L[j - m, j]
            L[i - j, i] = s / d[j]
        s = bands[0, i]
        for m in range(jlo, i):
            lim = L[i - m, i]
            s -= lim * lim * d[m]
        d[i] = s
        if (s if s >= 0 else -s) <= pivot_tol:
            bad = i
            break
    return lb, dd, bad


def band_ldlt_solve(const double[:, ::1] lbands, const double[::1] d,
                    const double[::1] b):
    cdef Py_ssize_t p1 = lbands.shape[0], n = lbands.shape[1]
    cdef Py_ssize_t p = p1 - 1
    cdef Py_ssize_t i, k, kmax
    cdef double s
    out = np.empty(n)
    cdef double[::1] y = out
    for i in range(n):
        s = b[i]
        kmax = p if p < i else i
        for k in range(1, kmax + 1):
            s -= lbands[k, i] * y[i - k]
        y[i] = s
    for i in range(n):
        y[i] /= d[i]
    for i in range(n - 1, -1, -1):
        s = y[i]
        kmax = p if p < n - 1 - i else n - 1 - i
        for k in range(1, kmax + 1):
            s -= lbands[k, i + k] * y[i + k]
        y[i] = s
    return out


def scatter_bands(const double[:, :, ::1] elem, const cnp.int64_t[:, ::1] dofmap,
                  Py_ssize_t n, Py_ssize_t p):
    cdef Py_ssize_t ne = elem.shape[0], kk = elem.shape[1]
    cdef Py_ssize_t e, a, b, r, c
    out = np.zeros((p + 1, n))
    cdef double[:, ::1] bands = out
    for e in range(ne):
        for a in range(kk):
            r = dofmap[e, a]
            for b in range(kk):
                c = dofmap[e, b]
                if r >= c:
                    bands[r - c, r] += elem[e, a, b]
    return out


def assemble_p2_bands(const double[:, ::1] wq, const double[:, :, ::1] table):
    """Bands of sum_e sum_q wq[e, q] * table[q] for the P2 dof map ``2e + a``."""
    cdef Py_ssize_t ne = wq.shape[0], nq = wq.shape[1]
    cdef Py_ssize_t n = 2 * ne + 1
    cdef Py_ssize_t e, q, a, b, r
    cdef double w
    cdef double loc[3][3]
    out = np.zeros((3, n))
    cdef double[:, ::1] bands = out
    for e in range(ne):
        for a in range(3):
            for b in range(3):
                loc[a][b] = 0.0
        for q in range(nq):
            w = wq[e, q]
            for a in range(3):
                for b in range(a + 1):
                    loc[a][b] += w * table[q, a, b]
        r = 2 * e
        for a in range(3):
            for b in range(a + 1):
                bands[a - b, r + a] += loc[a][b]
    return out


def lumped_p2_diagonal(const double[:, ::1] wn, const double[::1] lengths,
                       const double[::1] lobatto):
    """Diagonal of the nodal-quadrature mass form for the P2 dof map."""
    cdef Py_ssize_t ne = wn.shape[0]
    cdef Py_ssize_t e
    cdef double h
    out = np.zeros(2 * ne + 1)
    cdef double[::1] d = out
    for e in range(ne):
        h = lengths[e]
        d[2 * e] += wn[e, 0] * lobatto[0] * h
        d[2 * e + 1] += wn[e, 1] * lobatto[1] * h
        d[2 * e + 2] += wn[e, 2] * lobatto[2] * h
    return out
