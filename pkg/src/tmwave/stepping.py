"""Time integration of ``M(t) u'' + S(t) u' + K(t) u = F(t)``.

``M`` is the mass form weighted by 1/kappa, ``K`` the stiffness form weighted
by 1/rho and ``S`` the sum of the gain (b) and/or damping (sigma) mass forms.
Matrices are evaluated at ``t^n`` in every update.
"""

from dataclasses import dataclass, field
import logging

import numpy as np

from tmwave import fem1d, kernels
from tmwave.linalg import BandedSymMatrix, NotPositiveDefinite, factorize, solve

log = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 1e12
MASS_TYPE = ("mass", "gain", "damping", "rho", "kappa")


class Diverged(RuntimeError):
    def __init__(self, msg, step=None):
        super().__init__(msg)
        self.step = step


class StepError(RuntimeError):
    def __init__(self, msg, step):
        super().__init__(f"step {step}: {msg}")
        self.step = step


@dataclass(frozen=True, eq=False)
class WaveState:
    u_prev: np.ndarray
    u_curr: np.ndarray
    step_index: int
    dt: float

    @property
    def t_curr(self):
        return self.step_index * self.dt

    @property
    def velocity(self):
        """Backward-difference velocity ``(u^n - u^{n-1}) / dt``."""
        return (self.u_curr - self.u_prev) / self.dt


class MatrixCache:
    """Time-dependent assembled forms, cached when the model is separable.

    Lumped mass-type forms are kept as diagonals (1-D arrays); everything else
    as band arrays of shape ``(3, n_dofs)``.
    """

    def __init__(self, space, model, forms=("mass", "stiffness"), lumped=True,
                 use_separable=True):
        self.space, self.model = space, model
        self.lumped = lumped
        parts = model.separable_parts() if use_separable else None
        self._entries = {}
        for form in forms:
            lump = lumped and form in MASS_TYPE
            sep = parts.get(form) if parts else None
            if sep is not None:
                static = self._assemble_weight(form, sep.static, lump)
                spatial = self._assemble_weight(form, sep.spatial, lump)
                self._entries[form] = ("separable", lump, static, spatial, sep.modulation)
            else:
                self._entries[form] = ("direct", lump)

    @property
    def forms(self):
        return tuple(self._entries)

    def is_separable(self, form):
        return self._entries[form][0] == "separable"

    def is_lumped(self, form):
        return self._entries[form][1]

    def _assemble_weight(self, form, w, lump):
        sp = self.space
        if lump:
            wn = np.broadcast_to(w(sp.node_points), sp.node_points.shape)
            return fem1d.lumped_diagonal(sp, wn)
        wq = np.broadcast_to(w(sp.quad_points), sp.quad_points.shape)
        if form == "stiffness":
            return fem1d.stiffness_bands(sp, wq)
        return fem1d.mass_bands(sp, wq)

    def direct(self, form, t):
        """Reassemble ``form`` at time ``t`` from pointwise weights."""
        lump = self._entries[form][1]
        return self._assemble_weight(form, lambda x: self.model.weight(form, x, t), lump)

    def raw(self, form, t):
        entry = self._entries[form]
        if entry[0] == "separable":
            _, _, static, spatial, mod = entry
            return static + mod(t) * spatial
        return self.direct(form, t)

    def matrix(self, form, t):
        r = self.raw(form, t)
        if r.ndim == 1:
            return BandedSymMatrix.diagonal_matrix(r, fem1d.DEGREE)
        return BandedSymMatrix(r)


def _as_bands(r):
    if r.ndim == 1:
        b = np.zeros((fem1d.DEGREE + 1, r.size))
        b[0] = r
        return b
    return r


def _apply(r, x):
    if r.ndim == 1:
        return r * x
    return kernels.band_matvec(r, x)


def _mass_solve(r, rhs, bdofs, bvals):
    """Solve ``r u = rhs`` on the free dofs with ``u[bdofs] = bvals``."""
    if r.ndim == 1:
        u = rhs / r
        u[bdofs] = bvals
        return u
    a, b = fem1d.apply_dirichlet(BandedSymMatrix(r), rhs, bdofs, bvals)
    return solve(factorize(a), b)


class WaveSolver:
    """Spatial operators plus boundary data for one mesh.

    ``gain_loss`` selects the first-order term: ``()`` (pure leapfrog),
    ``("damping",)`` for sigma, ``("gain",)`` for b = d/dt(1/kappa) or both.
    ``boundary`` maps ``t`` to the two end-point values; ``None`` means
    homogeneous Dirichlet conditions.
    """

    def __init__(self, space, model, gain_loss=(), lumped=True, boundary=None,
                 use_separable=True):
        self.space, self.model = space, model
        self.gain_loss = tuple(gain_loss)
        self.cache = MatrixCache(space, model, ("mass", "stiffness") + self.gain_loss,
                                 lumped=lumped, use_separable=use_separable)
        self.boundary = boundary
        self.bdofs = space.dirichlet_dofs

    @property
    def method(self):
        return "lfcn" if self.gain_loss else "leapfrog"

    def boundary_values(self, t):
        if self.boundary is None:
            return np.zeros(2)
        return np.asarray(self.boundary(t), dtype=float)

    def load(self, t):
        if not self.model.has_source:
            return None
        return fem1d.assemble_load(self.space, lambda x: self.model.source(x, t))

    def damping_raw(self, t):
        if not self.gain_loss:
            return None
        total = None
        for form in self.gain_loss:
            r = self.cache.raw(form, t)
            if total is None:
                total = r
            elif total.ndim == r.ndim:
                total = total + r
            else:
                total = _as_bands(total) + _as_bands(r)
        return total


def startup(solver, u0, v0, dt):
    """Second-order Taylor start: ``u^1 = u^0 + dt v^0 + dt^2/2 a^0``.

    ``a^0`` solves the semi-discrete equation at ``t = 0``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    sp = solver.space
    bd = solver.bdofs
    u = fem1d.interpolate(sp, u0).dofs
    v = fem1d.interpolate(sp, v0).dofs
    g0 = solver.boundary_values(0.0)
    u[bd] = g0
    if solver.boundary is None:
        v[bd] = 0.0
    m = solver.cache.raw("mass", 0.0)
    rhs = -_apply(solver.cache.raw("stiffness", 0.0), u)
    f = solver.load(0.0)
    if f is not None:
        rhs += f
    s = solver.damping_raw(0.0)
    if s is not None:
        rhs -= _apply(s, v)
    acc = _mass_solve(m, rhs, bd, np.zeros(2))
    u1 = u + dt * v + 0.5 * dt * dt * acc
    u1[bd] = solver.boundary_values(dt)
    return WaveState(u, u1, 1, float(dt))


def _check(u, step):
    amp = np.max(np.abs(u))
    if not np.isfinite(amp) or amp > DIVERGENCE_THRESHOLD:
        raise Diverged(f"max |u| = {amp:.3e} exceeds {DIVERGENCE_THRESHOLD:g} at step {step}",
                       step=step)


def _rhs_common(solver, state, t):
    c = solver.cache
    rhs = -(state.dt ** 2) * _apply(c.raw("stiffness", t), state.u_curr)
    f = solver.load(t)
    if f is not None:
        rhs += state.dt ** 2 * f
    return rhs


def leapfrog_step(solver, state):
    """``M (u^{n+1} - 2u^n + u^{n-1}) / dt^2 + K u^n = F`` at ``t^n``."""
    t = state.t_curr
    dt = state.dt
    m = solver.cache.raw("mass", t)
    rhs = _rhs_common(solver, state, t) + _apply(m, 2.0 * state.u_curr - state.u_prev)
    bv = solver.boundary_values(t + dt)
    u_next = _mass_solve(m, rhs, solver.bdofs, bv)
    _check(u_next, state.step_index + 1)
    return WaveState(state.u_curr, u_next, state.step_index + 1, dt)


def lfcn_step(solver, state):
    """Leapfrog with the first-order term averaged over ``u^{n+1}`` and ``u^{n-1}``."""
    t = state.t_curr
    dt = state.dt
    m = solver.cache.raw("mass", t)
    s = solver.damping_raw(t)
    if s is None:
        return leapfrog_step(solver, state)
    if m.ndim == 1 and s.ndim == 1:
        lhs = m + 0.5 * dt * s
        rhs_prev = m - 0.5 * dt * s
        free = np.ones(lhs.size, dtype=bool)
        free[solver.bdofs] = False
        if np.any(lhs[free] <= 0):
            i = int(np.nonzero(free & (lhs <= 0))[0][0])
            raise NotPositiveDefinite(
                f"M + dt/2 S has non-positive diagonal {lhs[i]:.3e} at dof {i}; "
                f"reduce dt")
    else:
        m, s = _as_bands(m), _as_bands(s)
        lhs = m + 0.5 * dt * s
        rhs_prev = m - 0.5 * dt * s
    rhs = (_rhs_common(solver, state, t) + 2.0 * _apply(m, state.u_curr)
           - _apply(rhs_prev, state.u_prev))
    bv = solver.boundary_values(t + dt)
    if lhs.ndim == 1:
        u_next = rhs / lhs
        u_next[solver.bdofs] = bv
    else:
        a, b = fem1d.apply_dirichlet(BandedSymMatrix(lhs), rhs, solver.bdofs, bv)
        u_next = solve(factorize(a, "cholesky"), b)
    _check(u_next, state.step_index + 1)
    return WaveState(state.u_curr, u_next, state.step_index + 1, dt)


def step(solver, state):
    return lfcn_step(solver, state) if solver.gain_loss else leapfrog_step(solver, state)


def leapfrog_energy(solver, state):
    """Quantity conserved exactly by leapfrog in a static medium:
    ``|(u^n - u^{n-1})/dt|_M^2 / 2 + <K u^n, u^{n-1}> / 2``."""
    t = state.t_curr
    v = state.velocity
    m = solver.cache.raw("mass", t)
    k = solver.cache.raw("stiffness", t)
    return 0.5 * float(v @ _apply(m, v)) + 0.5 * float(state.u_prev @ _apply(k, state.u_curr))


@dataclass
class Trajectory:
    snapshots: list = field(default_factory=list)      # (t, FeFunction)
    energy_series: list = field(default_factory=list)  # (t, float)
    monitor_series: list = field(default_factory=list)  # (t, monitor output)
    final_state: WaveState = None


def run(solver, u0, v0, dt, T, snapshot_times=(), energy=None, energy_every=0,
        monitor=None, monitor_every=1, state=None):
    """Integrate up to ``T`` with a uniform step.

    ``dt`` is shrunk so that ``T`` is an integer number of steps. Snapshots
    use the nearest step time. ``energy(state)`` and ``monitor(state)`` are
    sampled every ``energy_every`` / ``monitor_every`` steps.
    """
    if T < 0:
        raise ValueError("T must be non-negative")
    snaps = sorted(float(s) for s in snapshot_times)
    if any(s < 0 or s > T for s in snaps):
        raise ValueError("snapshot times must lie in [0, T]")
    n_steps = int(np.ceil(T / dt - 1e-9)) if T > 0 else 0
    if n_steps:
        dt = T / n_steps
    traj = Trajectory()
    sp = solver.space
    if state is None:
        state = startup(solver, u0, v0, dt if n_steps else (dt or 1.0))
    targets = {}
    for s in snaps:
        targets.setdefault(int(round(s / dt)) if n_steps else 0, []).append(s)

    def record(k, u):
        for s in targets.get(k, ()):
            traj.snapshots.append((k * dt if n_steps else 0.0, fem1d.FeFunction(sp, u.copy())))

    record(0, state.u_prev)
    if n_steps >= 1:
        record(1, state.u_curr)

    def sample(st):
        if energy is not None and energy_every and st.step_index % energy_every == 0:
            traj.energy_series.append((st.t_curr, float(energy(st))))
        if monitor is not None and monitor_every and st.step_index % monitor_every == 0:
            traj.monitor_series.append((st.t_curr, monitor(st)))

    sample(state)
    advance = lfcn_step if solver.gain_loss else leapfrog_step
    while state.step_index < n_steps:
        try:
            state = advance(solver, state)
        except (Diverged, NotPositiveDefinite) as exc:
            exc.step = state.step_index + 1
            traj.final_state = state
            exc.partial = traj  # everything recorded before the failing step
            raise
        record(state.step_index, state.u_curr)
        sample(state)
    traj.final_state = state
    return traj


def stable_dt(space, model, c_cfl=0.5, n_t=64):
    """CFL step ``c_cfl * (smallest node spacing) / c_max``.

    ``c_max`` is the largest sampled ``sqrt(kappa/rho)`` over the element
    nodes, Gauss points and one modulation period.
    """
    pts = np.concatenate([space.node_points.ravel(), space.quad_points.ravel()])
    ts = np.linspace(0.0, model.sample_period, n_t)
    c_max = max(float(np.max(model.wave_speed(pts, t))) for t in ts)
    spacing = np.min(np.diff(space.dof_coords))
    return c_cfl * spacing / c_max


def power_law_dt(h, dt0, h0, exponent=1.5):
    """Convergence-study rule ``dt = dt0 (h/h0)^exponent``."""
    return dt0 * (h / h0) ** exponent
