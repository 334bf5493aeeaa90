"""Continuous P2 finite elements on 1D meshes.

Degrees of freedom sit at the Gauss-Lobatto points of each element (the two
end points and the midpoint), so the 3-point Gauss-Lobatto rule collocated at
the nodes gives the lumped (diagonal) mass matrix.
"""

from dataclasses import dataclass, field

import numpy as np

from tmwave import kernels
from tmwave.linalg import BandedSymMatrix

DEGREE = 2
N_LOCAL = DEGREE + 1
LOBATTO_NODES = np.array([0.0, 0.5, 1.0])
LOBATTO_WEIGHTS = np.array([1.0, 4.0, 1.0]) / 6.0
# exact for degree 7 on each element
_gx, _gw = np.polynomial.legendre.leggauss(4)
GAUSS_NODES = 0.5 * (_gx + 1.0)
GAUSS_WEIGHTS = 0.5 * _gw
# one point keeps endpoint evaluations on the element's own side of a jump
_INSET = 1e-12


class MeshError(ValueError):
    pass


class TooFewElements(MeshError):
    pass


class NonFiniteWeight(ValueError):
    pass


class OutOfDomain(ValueError):
    pass


def shape_functions(xi):
    """Reference P2 basis at ``xi`` in [0, 1]; shape ``(3,) + xi.shape``."""
    xi = np.asarray(xi, dtype=float)
    return np.array([2.0 * (xi - 0.5) * (xi - 1.0),
                     4.0 * xi * (1.0 - xi),
                     2.0 * xi * (xi - 0.5)])


def shape_derivatives(xi):
    """d/dxi of the reference basis."""
    xi = np.asarray(xi, dtype=float)
    return np.array([4.0 * xi - 3.0, 4.0 - 8.0 * xi, 4.0 * xi - 1.0])


@dataclass(frozen=True, eq=False)
class Mesh1D:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise MeshError("need at least two vertices")
        if not np.all(np.diff(v) > 0):
            raise MeshError("vertices must be strictly increasing")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        lengths = np.diff(v)
        lengths.setflags(write=False)
        object.__setattr__(self, "lengths", lengths)

    @property
    def left(self):
        return float(self.vertices[0])

    @property
    def right(self):
        return float(self.vertices[-1])

    @property
    def n_elements(self):
        return self.vertices.size - 1

    @property
    def h(self):
        return float(self.lengths.max())

    @property
    def h_min(self):
        return float(self.lengths.min())

    def refine(self, factor):
        """Split every element into ``factor`` equal pieces (nested refinement)."""
        v = self.vertices
        s = np.arange(factor) / factor
        inner = (v[:-1, None] + s[None, :] * np.diff(v)[:, None]).ravel()
        return Mesh1D(np.append(inner, v[-1]))


def build_mesh(left, right, n_elements, required_vertices=None):
    """Quasi-uniform mesh of ``[left, right]`` honouring ``required_vertices``.

    Elements are distributed across the segments between required vertices in
    proportion to segment length (largest remainder, at least one per segment)
    and each segment is split uniformly.
    """
    if not left < right:
        raise MeshError(f"need left < right, got {left}, {right}")
    if n_elements < 1:
        raise TooFewElements("n_elements must be >= 1")
    req = np.unique(np.asarray(required_vertices if required_vertices is not None else [],
                               dtype=float))
    if req.size and (req.min() <= left or req.max() >= right):
        raise MeshError("required vertices must lie strictly inside (left, right)")
    breaks = np.concatenate([[left], req, [right]])
    seg = np.diff(breaks)
    if n_elements < seg.size:
        raise TooFewElements(f"{seg.size} segments need at least that many elements, "
                             f"got {n_elements}")
    share = seg / (right - left) * n_elements
    counts = np.maximum(np.floor(share).astype(int), 1)
    while counts.sum() > n_elements:
        # take back from the segment that is most over-served
        i = np.argmax(np.where(counts > 1, counts - share, -np.inf))
        counts[i] -= 1
    while counts.sum() < n_elements:
        i = np.argmax(share - counts)
        counts[i] += 1
    pieces = [np.linspace(breaks[i], breaks[i + 1], counts[i] + 1)[:-1]
              for i in range(seg.size)]
    mesh = Mesh1D(np.append(np.concatenate(pieces), right))
    ratio = mesh.lengths.max() / mesh.lengths.min()
    if ratio > 2.0 + 1e-12:
        raise TooFewElements(f"cannot keep element-length ratio <= 2 (got {ratio:.3f}) "
                             f"with {n_elements} elements")
    return mesh


@dataclass(frozen=True, eq=False)
class FeSpace:
    """P2 Lagrange space with Dirichlet conditions at both end points."""

    mesh: Mesh1D
    degree: int = field(default=DEGREE, init=False)

    def __post_init__(self):
        ne = self.mesh.n_elements
        dofmap = 2 * np.arange(ne)[:, None] + np.arange(N_LOCAL)[None, :]
        v = self.mesh.vertices
        coords = np.empty(2 * ne + 1)
        coords[0::2] = v
        coords[1::2] = 0.5 * (v[:-1] + v[1:])
        for a in (dofmap, coords):
            a.setflags(write=False)
        object.__setattr__(self, "dofmap", dofmap)
        object.__setattr__(self, "dof_coords", coords)
        h = self.mesh.lengths
        xq = v[:-1, None] + GAUSS_NODES[None, :] * h[:, None]
        xn = v[:-1, None] + LOBATTO_NODES[None, :] * h[:, None]
        # nudged inward so piecewise coefficients are read from inside the element
        xn[:, 0] += _INSET * h
        xn[:, -1] -= _INSET * h
        xq.setflags(write=False)
        xn.setflags(write=False)
        object.__setattr__(self, "quad_points", xq)
        object.__setattr__(self, "node_points", xn)

    @property
    def n_dofs(self):
        return self.dof_coords.size

    @property
    def dirichlet_dofs(self):
        return np.array([0, self.n_dofs - 1])

    @property
    def interior_dofs(self):
        return np.arange(1, self.n_dofs - 1)

    @property
    def half_bandwidth(self):
        return DEGREE

    def quad_weights(self):
        """Per-element Gauss weights scaled by the element length."""
        return GAUSS_WEIGHTS[None, :] * self.mesh.lengths[:, None]

    def locate(self, x):
        """Element index and reference coordinate of each point (left-limit at vertices)."""
        x = np.asarray(x, dtype=float)
        v = self.mesh.vertices
        tol = 1e-12 * (v[-1] - v[0])
        if np.any(x < v[0] - tol) or np.any(x > v[-1] + tol):
            raise OutOfDomain(f"points outside [{v[0]}, {v[-1]}]")
        e = np.clip(np.searchsorted(v, x, side="left") - 1, 0, self.mesh.n_elements - 1)
        xi = (x - v[e]) / (v[e + 1] - v[e])
        return e, xi


@dataclass(eq=False)
class FeFunction:
    space: FeSpace
    dofs: np.ndarray

    def __post_init__(self):
        self.dofs = np.asarray(self.dofs, dtype=float)
        if self.dofs.shape != (self.space.n_dofs,):
            raise ValueError(f"expected {self.space.n_dofs} dofs, got {self.dofs.shape}")

    def __call__(self, x):
        return evaluate(self, x)

    def derivative(self, x):
        return evaluate_derivative(self, x)


def _check_finite(values, what):
    if not np.all(np.isfinite(values)):
        raise NonFiniteWeight(f"{what} is not finite at some quadrature point")


def _weights_at(points, w):
    if callable(w):
        vals = np.asarray(w(points), dtype=float)
        return np.broadcast_to(vals, points.shape)
    return np.broadcast_to(np.asarray(w, dtype=float), points.shape)


_PHI_Q = shape_functions(GAUSS_NODES)          # (3, nq)
_DPHI_Q = shape_derivatives(GAUSS_NODES)        # (3, nq)
MASS_TABLE = np.einsum("aq,bq,q->qab", _PHI_Q, _PHI_Q, GAUSS_WEIGHTS)
STIFF_TABLE = np.einsum("aq,bq,q->qab", _DPHI_Q, _DPHI_Q, GAUSS_WEIGHTS)


def mass_element_matrices(space, wq):
    """Element mass matrices from weight values at the Gauss points."""
    return np.einsum("eq,qab->eab", wq * space.mesh.lengths[:, None], MASS_TABLE)


def stiffness_element_matrices(space, wq):
    return np.einsum("eq,qab->eab", wq / space.mesh.lengths[:, None], STIFF_TABLE)


def mass_bands(space, wq):
    """Band storage of the consistent mass form from Gauss-point weights."""
    return kernels.assemble_p2_bands(wq * space.mesh.lengths[:, None], MASS_TABLE)


def stiffness_bands(space, wq):
    return kernels.assemble_p2_bands(wq / space.mesh.lengths[:, None], STIFF_TABLE)


def banded_from_elements(space, elem):
    bands = kernels.scatter_bands(elem, space.dofmap, space.n_dofs, DEGREE)
    return BandedSymMatrix(bands)


def lumped_diagonal(space, wn):
    """Diagonal of the lumped mass form from weight values at the element nodes."""
    return kernels.lumped_p2_diagonal(wn, space.mesh.lengths, LOBATTO_WEIGHTS)


def assemble_weighted_mass(space, w=1.0, lumped=False):
    """Matrix of ``(w phi_k, phi_l)``; ``w`` is a callable of x or a constant."""
    if lumped:
        wn = _weights_at(space.node_points, w)
        _check_finite(wn, "mass weight")
        return BandedSymMatrix.diagonal_matrix(lumped_diagonal(space, wn), DEGREE)
    wq = _weights_at(space.quad_points, w)
    _check_finite(wq, "mass weight")
    return BandedSymMatrix(mass_bands(space, wq))


def assemble_weighted_stiffness(space, w=1.0):
    """Matrix of ``(w phi_k', phi_l')``."""
    wq = _weights_at(space.quad_points, w)
    _check_finite(wq, "stiffness weight")
    return BandedSymMatrix(stiffness_bands(space, wq))


def load_from_values(space, fq):
    """Load vector from integrand values ``fq`` at the Gauss points."""
    contrib = np.einsum("eq,aq->ea", fq * space.quad_weights(), _PHI_Q)
    out = np.zeros(space.n_dofs)
    out[0:-1:2] += contrib[:, 0]
    out[1::2] += contrib[:, 1]
    out[2::2] += contrib[:, 2]
    return out


def gradient_load_from_values(space, gq):
    """Vector of ``(g, phi_l')`` from values of ``g`` at the Gauss points."""
    contrib = np.einsum("eq,aq->ea", gq * GAUSS_WEIGHTS[None, :], _DPHI_Q)
    out = np.zeros(space.n_dofs)
    out[0:-1:2] += contrib[:, 0]
    out[1::2] += contrib[:, 1]
    out[2::2] += contrib[:, 2]
    return out


def assemble_load(space, f):
    fq = _weights_at(space.quad_points, f)
    _check_finite(fq, "load")
    return load_from_values(space, fq)


def interpolate(space, g, homogeneous=False):
    dofs = np.array(np.broadcast_to(g(space.dof_coords), (space.n_dofs,)), dtype=float)
    if homogeneous:
        dofs[space.dirichlet_dofs] = 0.0
    return FeFunction(space, dofs)


def _element_values(f, e):
    d = f.dofs
    return np.stack([d[2 * e], d[2 * e + 1], d[2 * e + 2]])


def evaluate(f, x):
    """Value of the piecewise quadratic ``f`` at ``x`` (scalar or array)."""
    scalar = np.ndim(x) == 0
    e, xi = f.space.locate(np.atleast_1d(x))
    out = np.sum(shape_functions(xi) * _element_values(f, e), axis=0)
    return float(out[0]) if scalar else out


def evaluate_derivative(f, x):
    """Derivative of ``f``; at interior vertices the left element is used."""
    scalar = np.ndim(x) == 0
    e, xi = f.space.locate(np.atleast_1d(x))
    h = f.space.mesh.lengths[e]
    out = np.sum(shape_derivatives(xi) * _element_values(f, e), axis=0) / h
    return float(out[0]) if scalar else out


def values_at_quadrature(space, dofs, points_ref=GAUSS_NODES):
    """Values and x-derivatives of a dof vector at reference points of every element."""
    u = dofs[space.dofmap]                                # (ne, 3)
    phi = shape_functions(points_ref)                     # (3, nq)
    dphi = shape_derivatives(points_ref)
    val = u @ phi
    der = (u @ dphi) / space.mesh.lengths[:, None]
    return val, der


def apply_dirichlet(a, rhs, dofs=None, values=None):
    """Pin ``dofs`` (default: both end points) by symmetric elimination.

    Rows and columns of the pinned dofs become identity; their coupling to
    the free dofs moves to the right-hand side so prescribed ``values`` (zero
    by default) are honoured.
    """
    n = a.n
    dofs = np.array([0, n - 1]) if dofs is None else np.asarray(dofs)
    values = np.zeros(len(dofs)) if values is None else np.asarray(values, dtype=float)
    rhs = np.array(rhs, dtype=float)
    if np.any(values):
        g = np.zeros(n)
        g[dofs] = values
        rhs -= a @ g
    bands = np.array(a.bands)
    p = a.half_bandwidth
    for i in dofs:
        bands[1:, i] = 0.0
        for k in range(1, p + 1):
            if i + k < n:
                bands[k, i + k] = 0.0
        bands[0, i] = 1.0
    rhs[dofs] = values
    return BandedSymMatrix(bands), rhs
