"""Pure-Python/numpy versions of the banded kernels.

Band storage convention (shared with the compiled module): ``bands[k, i]``
holds ``A[i, i - k]`` for ``k = 0..p``; entries with ``i < k`` are unused
and kept at zero.
"""

import numpy as np


def band_matvec(bands, x):
    p1, n = bands.shape
    y = bands[0] * x
    for k in range(1, p1):
        lo = bands[k, k:]
        y[k:] += lo * x[:-k]
        y[:-k] += lo * x[k:]
    return y


def band_ldlt(bands, pivot_tol):
    """Unpivoted banded LDL^T.

    Returns ``(lbands, d, bad)`` where ``lbands`` holds the strict lower
    factor in band storage (row 0 is unused) and ``bad`` is the first row
    whose pivot magnitude fell to ``pivot_tol`` or below (-1 if none).
    """
    p1, n = bands.shape
    p = p1 - 1
    lbands = np.zeros_like(bands)
    d = np.zeros(n)
    for i in range(n):
        jlo = max(0, i - p)
        # l[i, j] * d[j] accumulated column by column
        for j in range(jlo, i):
            s = bands[i - j, i]
            for m in range(max(jlo, j - p), j):
                s -= lbands[i - m, i] * d[m] * lbands[j - m, j]
            lbands[i - j, i] = s / d[j]
        s = bands[0, i]
        for m in range(jlo, i):
            lim = lbands[i - m, i]
            s -= lim * lim * d[m]
        d[i] = s
        if abs(s) <= pivot_tol:
            return lbands, d, i
    return lbands, d, -1


def band_ldlt_solve(lbands, d, b):
    p1, n = lbands.shape
    p = p1 - 1
    y = np.array(b, dtype=float)
    for i in range(n):
        s = y[i]
        for k in range(1, min(p, i) + 1):
            s -= lbands[k, i] * y[i - k]
        y[i] = s
    y /= d
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(1, min(p, n - 1 - i) + 1):
            s -= lbands[k, i + k] * y[i + k]
        y[i] = s
    return y


def scatter_bands(elem, dofmap, n, p):
    """Sum element matrices ``elem[e]`` (local ``k x k``) into band storage."""
    bands = np.zeros((p + 1, n))
    k = dofmap.shape[1]
    for a in range(k):
        for b in range(k):
            rows = dofmap[:, a]
            cols = dofmap[:, b]
            lower = rows >= cols
            off = rows[lower] - cols[lower]
            np.add.at(bands, (off, rows[lower]), elem[lower, a, b])
    return bands


def assemble_p2_bands(wq, table):
    """Bands of ``sum_e sum_q wq[e, q] * table[q]`` for the P2 dof map ``2e + a``."""
    ne = wq.shape[0]
    elem = np.tensordot(wq, table, axes=(1, 0))          # (ne, 3, 3)
    bands = np.zeros((3, 2 * ne + 1))
    bands[0, 0:-1:2] += elem[:, 0, 0]
    bands[0, 1::2] += elem[:, 1, 1]
    bands[0, 2::2] += elem[:, 2, 2]
    bands[1, 1::2] = elem[:, 1, 0]
    bands[1, 2::2] = elem[:, 2, 1]
    bands[2, 2::2] = elem[:, 2, 0]
    return bands


def lumped_p2_diagonal(wn, lengths, lobatto):
    contrib = wn * lobatto[None, :] * lengths[:, None]
    d = np.zeros(2 * wn.shape[0] + 1)
    d[0:-1:2] += contrib[:, 0]
    d[1::2] += contrib[:, 1]
    d[2::2] += contrib[:, 2]
    return d
