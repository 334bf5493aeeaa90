"""Error norms, reference-solution comparison, rate fitting and energy diagnostics."""

from dataclasses import dataclass, field

import numpy as np

from tmwave import fem1d

# two orders above the assembly rule so measurement does not alias the error
_gx, _gw = np.polynomial.legendre.leggauss(6)
MEASURE_NODES = 0.5 * (_gx + 1.0)
MEASURE_WEIGHTS = 0.5 * _gw


class DegenerateFit(ValueError):
    pass


class NotNested(ValueError):
    pass


def _measure_points(space):
    v = space.mesh.vertices
    h = space.mesh.lengths
    x = v[:-1, None] + MEASURE_NODES[None, :] * h[:, None]
    w = MEASURE_WEIGHTS[None, :] * h[:, None]
    return x, w


def error_vs_callable(f, exact, exact_derivative):
    """Return ``(||f - u||_L2, ||f - u||_H1)`` with the full H1 norm."""
    sp = f.space
    x, w = _measure_points(sp)
    val, der = fem1d.values_at_quadrature(sp, f.dofs, MEASURE_NODES)
    e0 = val - exact(x)
    e1 = der - exact_derivative(x)
    l2sq = float(np.sum(w * e0 * e0))
    semi = float(np.sum(w * e1 * e1))
    return np.sqrt(l2sq), np.sqrt(l2sq + semi)


def is_nested(coarse_mesh, fine_mesh, tol=1e-12):
    fv = fine_mesh.vertices
    scale = max(1.0, abs(fv[0]), abs(fv[-1]))
    idx = np.clip(np.searchsorted(fv, coarse_mesh.vertices), 0, fv.size - 1)
    lo = np.clip(idx - 1, 0, fv.size - 1)
    dist = np.minimum(np.abs(fv[idx] - coarse_mesh.vertices),
                      np.abs(fv[lo] - coarse_mesh.vertices))
    return bool(np.all(dist <= tol * scale))


def error_vs_reference(coarse, fine):
    """Errors of ``coarse`` against ``fine`` on the fine mesh's quadrature.

    The coarse function is evaluated exactly at the fine points; each fine
    element lies inside one coarse element, so no projection is involved.
    """
    if not is_nested(coarse.space.mesh, fine.space.mesh):
        raise NotNested("coarse vertices are not a subset of the fine vertices")
    fs = fine.space
    x, w = _measure_points(fs)
    fval, fder = fem1d.values_at_quadrature(fs, fine.dofs, MEASURE_NODES)
    # fine-element midpoints pick the containing coarse element unambiguously
    mids = 0.5 * (fs.mesh.vertices[:-1] + fs.mesh.vertices[1:])
    e, _ = coarse.space.locate(mids)
    cv = coarse.space.mesh.vertices
    xi = (x - cv[e][:, None]) / (cv[e + 1] - cv[e])[:, None]
    u = coarse.dofs[coarse.space.dofmap[e]]              # (ne_fine, 3)
    phi = fem1d.shape_functions(xi)                      # (3, ne_fine, nq)
    dphi = fem1d.shape_derivatives(xi)
    cval = np.einsum("ea,aeq->eq", u, phi)
    cder = np.einsum("ea,aeq->eq", u, dphi) / (cv[e + 1] - cv[e])[:, None]
    e0 = cval - fval
    e1 = cder - fder
    l2sq = float(np.sum(w * e0 * e0))
    semi = float(np.sum(w * e1 * e1))
    return np.sqrt(l2sq), np.sqrt(l2sq + semi)


def fit_rate(h, err):
    """Least-squares slope of ``log err`` against ``log h``."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if h.size < 3 or h.size != err.size:
        raise DegenerateFit("need matching h and error arrays with at least three rows")
    if np.any(err <= 0) or not np.all(np.isfinite(err)):
        raise DegenerateFit("errors must be positive and finite to fit a rate")
    slope, _ = np.polyfit(np.log(h), np.log(err), 1)
    return float(slope)


@dataclass
class RateTable:
    """Rows of ``(h, dt, err_l2, err_h1)`` with fitted log-log slopes."""

    h: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    err_l2: list = field(default_factory=list)
    err_h1: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def add(self, h, dt, err_l2, err_h1):
        if self.h and not h < self.h[-1]:
            raise ValueError("h must be strictly decreasing across rows")
        self.h.append(float(h))
        self.dt.append(float(dt))
        self.err_l2.append(float(err_l2))
        self.err_h1.append(float(err_h1))

    def __len__(self):
        return len(self.h)

    @property
    def exact(self):
        """True when every error vanishes to round-off (no rate to fit)."""
        return bool(np.all(np.array(self.err_l2 + self.err_h1) <= 1e-9))

    @property
    def slope_l2(self):
        return fit_rate(self.h, self.err_l2)

    @property
    def slope_h1(self):
        return fit_rate(self.h, self.err_h1)

    def to_csv(self, header_lines=()):
        lines = [f"# {line}" for line in header_lines]
        lines.append("h,dt,err_l2,err_h1")
        for row in zip(self.h, self.dt, self.err_l2, self.err_h1):
            lines.append(",".join(fmt(v) for v in row))
        if self.exact:
            lines.append("# exact=true")
        elif len(self) < 3:
            lines.append("# slopes not fitted (fewer than three rows)")
        else:
            lines.append(f"# slope_l2={fmt(self.slope_l2)} slope_h1={fmt(self.slope_h1)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text):
        table = cls()
        for line in text.splitlines():
            if not line or line.startswith("#") or line.startswith("h,"):
                continue
            table.add(*map(float, line.split(",")))
        return table


def fmt(v):
    return "%.17g" % v


def energy(state, model, space):
    """``E = 1/2 int (1/kappa) v^2 + 1/2 int (1/rho) u_x^2`` at ``t = t_curr``.

    ``v`` is the backward difference of the two stored levels.
    """
    t = state.t_curr
    xq = space.quad_points
    w = space.quad_weights()
    vel, _ = fem1d.values_at_quadrature(space, state.velocity)
    _, ux = fem1d.values_at_quadrature(space, state.u_curr)
    kin = np.sum(w * model.inv_kappa(xq, t) * vel * vel)
    pot = np.sum(w * model.inv_rho(xq, t) * ux * ux)
    return 0.5 * float(kin + pot)
