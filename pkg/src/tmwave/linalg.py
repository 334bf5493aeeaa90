"""Symmetric banded matrices: storage, LDL^T / Cholesky, solves, eigenvalue bounds."""

from dataclasses import dataclass

import numpy as np

from tmwave import kernels


class LinAlgError(ValueError):
    pass


class NotPositiveDefinite(LinAlgError):
    pass


class SingularPivot(LinAlgError):
    pass


class DimensionMismatch(LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class BandedSymMatrix:
    """Symmetric matrix stored by its diagonal and ``half_bandwidth`` sub-diagonals.

    ``bands[k, i]`` is ``A[i, i - k]``; slots with ``i < k`` are zero.
    """

    bands: np.ndarray

    def __post_init__(self):
        b = np.array(self.bands, dtype=float)
        if b.ndim != 2 or b.shape[1] < 1:
            raise ValueError(f"bands must be 2-D with n >= 1, got shape {b.shape}")
        if b.shape[0] - 1 >= b.shape[1]:
            raise ValueError("half_bandwidth must be < n")
        if not np.all(np.isfinite(b)):
            raise ValueError("non-finite entry in banded matrix")
        for k in range(1, b.shape[0]):
            b[k, :k] = 0.0
        b.setflags(write=False)
        object.__setattr__(self, "bands", b)

    @property
    def n(self):
        return self.bands.shape[1]

    @property
    def half_bandwidth(self):
        return self.bands.shape[0] - 1

    @classmethod
    def from_dense(cls, a, half_bandwidth=None):
        a = np.asarray(a, dtype=float)
        n = a.shape[0]
        if a.shape != (n, n):
            raise DimensionMismatch(f"expected a square matrix, got {a.shape}")
        if half_bandwidth is None:
            nz = np.nonzero(np.tril(a))
            half_bandwidth = int(np.max(nz[0] - nz[1])) if len(nz[0]) else 0
        p = min(half_bandwidth, n - 1)
        bands = np.zeros((p + 1, n))
        for k in range(p + 1):
            bands[k, k:] = np.diagonal(a, -k)
        return cls(bands)

    @classmethod
    def diagonal_matrix(cls, d, half_bandwidth=0):
        d = np.asarray(d, dtype=float)
        bands = np.zeros((half_bandwidth + 1, d.size))
        bands[0] = d
        return cls(bands)

    @classmethod
    def identity(cls, n, half_bandwidth=0):
        return cls.diagonal_matrix(np.ones(n), half_bandwidth)

    def to_dense(self):
        a = np.diag(self.bands[0])
        for k in range(1, self.half_bandwidth + 1):
            off = np.diag(self.bands[k, k:], -k)
            a = a + off + off.T
        return a

    def diagonal(self):
        return self.bands[0].copy()

    def with_bandwidth(self, p):
        if p == self.half_bandwidth:
            return self
        if p < self.half_bandwidth:
            if np.any(self.bands[p + 1:]):
                raise ValueError("cannot drop non-zero bands")
            return BandedSymMatrix(self.bands[: p + 1])
        bands = np.zeros((p + 1, self.n))
        bands[: self.half_bandwidth + 1] = self.bands
        return BandedSymMatrix(bands)

    def _aligned(self, other):
        if not isinstance(other, BandedSymMatrix):
            return NotImplemented
        if other.n != self.n:
            raise DimensionMismatch(f"{self.n} vs {other.n}")
        p = max(self.half_bandwidth, other.half_bandwidth)
        return self.with_bandwidth(p).bands, other.with_bandwidth(p).bands

    def __add__(self, other):
        pair = self._aligned(other)
        if pair is NotImplemented:
            return pair
        return BandedSymMatrix(pair[0] + pair[1])

    def __sub__(self, other):
        pair = self._aligned(other)
        if pair is NotImplemented:
            return pair
        return BandedSymMatrix(pair[0] - pair[1])

    def __mul__(self, scalar):
        return BandedSymMatrix(self.bands * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return BandedSymMatrix(-self.bands)

    def __matmul__(self, x):
        return matvec(self, x)

    def norm_inf(self):
        """Max absolute row sum."""
        return float(np.max(matvec_abs(self)))

    def shifted(self, s):
        b = self.bands.copy()
        b[0] -= s
        return BandedSymMatrix(b)


def matvec_abs(a):
    return kernels.band_matvec(np.abs(a.bands), np.ones(a.n))


@dataclass(frozen=True, eq=False)
class Factorization:
    """Banded ``A = L D L^T`` with unit lower ``L``."""

    lbands: np.ndarray
    d: np.ndarray
    cholesky: bool = False

    @property
    def n(self):
        return self.d.size

    @property
    def is_positive_definite(self):
        return bool(np.all(self.d > 0))

    def lower_dense(self):
        n = self.n
        low = np.eye(n)
        for k in range(1, self.lbands.shape[0]):
            low += np.diag(self.lbands[k, k:], -k)
        return low

    def reconstruct(self):
        low = self.lower_dense()
        return low @ np.diag(self.d) @ low.T


def _pivot_tol(a, rtol):
    return rtol * max(a.norm_inf(), np.finfo(float).tiny)


def factorize(a, method="ldlt", rtol=1e-14):
    """Factorize ``a`` without pivoting.

    ``method="ldlt"`` accepts indefinite matrices and raises ``SingularPivot``
    on a vanishing pivot. ``method="cholesky"`` additionally requires every
    pivot to be positive and raises ``NotPositiveDefinite`` otherwise.
    """
    if method not in ("ldlt", "cholesky"):
        raise ValueError(f"unknown method {method!r}")
    tol = _pivot_tol(a, rtol)
    lbands, d, bad = kernels.band_ldlt(a.bands, tol)
    if method == "cholesky":
        nonpos = np.nonzero(d[: (bad if bad >= 0 else a.n)] <= 0)[0]
        if bad >= 0 or nonpos.size:
            row = int(nonpos[0]) if nonpos.size else bad
            raise NotPositiveDefinite(f"non-positive pivot {d[row]:.3e} at row {row}")
    elif bad >= 0:
        raise SingularPivot(f"pivot {d[bad]:.3e} at row {bad} below tolerance {tol:.3e}")
    lbands.setflags(write=False)
    d.setflags(write=False)
    return Factorization(lbands, d, cholesky=(method == "cholesky"))


def is_positive_definite(a, rtol=1e-14):
    """Sylvester inertia test: all LDL^T pivots strictly positive."""
    lbands, d, bad = kernels.band_ldlt(a.bands, _pivot_tol(a, rtol))
    return bad < 0 and bool(np.all(d > 0))


def solve(f, b):
    b = np.asarray(b, dtype=float)
    if b.shape != (f.n,):
        raise DimensionMismatch(f"rhs shape {b.shape} vs n={f.n}")
    return kernels.band_ldlt_solve(f.lbands, f.d, b)


def matvec(a, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (a.n,):
        raise DimensionMismatch(f"vector shape {x.shape} vs n={a.n}")
    return kernels.band_matvec(a.bands, x)


def gershgorin_lower(a):
    off = matvec_abs(a) - np.abs(a.bands[0])
    return float(np.min(a.bands[0] - off))


def min_eig_lower_bound(a, margin=0.01, maxiter=500, tol=1e-10):
    """Lower bound on the smallest eigenvalue of ``a``.

    Gershgorin gives a guaranteed floor. Shifted inverse iteration refines it:
    the Rayleigh quotient is pulled down by ``margin`` times its magnitude and
    accepted only when ``a - lam*I`` passes the LDL^T inertia test. The result
    is the larger of the two.
    """
    g = gershgorin_lower(a)
    scale = max(a.norm_inf(), np.finfo(float).tiny)
    # a shift at or below the spectrum keeps a - shift*I semi-definite
    shift = g - 1e-8 * scale
    if g < 0 and is_positive_definite(a):
        shift = 0.0
    try:
        fac = factorize(a.shifted(shift))
    except LinAlgError:
        return g
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(a.n)
    v /= np.linalg.norm(v)
    rq = float(v @ matvec(a, v))
    for _ in range(maxiter):
        w = solve(fac, v)
        nrm = np.linalg.norm(w)
        if not np.isfinite(nrm) or nrm == 0:
            return g
        v = w / nrm
        new = float(v @ matvec(a, v))
        done = abs(new - rq) <= tol * scale
        rq = new
        if done:
            break
    step = margin * max(abs(rq), 1e-12 * scale)
    for _ in range(8):
        cand = rq - step
        if cand <= g:
            return g
        if is_positive_definite(a.shifted(cand)):
            return cand
        step *= 4.0
    return g
