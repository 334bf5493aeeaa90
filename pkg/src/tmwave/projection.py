"""Time-dependent Ritz-like projection of a known solution onto the P2 space.

The projection ``w(t)`` solves, for every test function ``chi`` in the space,

    (a (w - u)_x, chi_x) + gamma ((w - u)_tx, chi_x) + (b (w - u)_t, chi) = 0,

with ``a = 1/rho`` and ``b = d/dt(1/kappa)``, starting from the plain Ritz
projection of ``u(0)``. In coefficients this is the linear ODE

    (gamma K + B(t)) C' + A(t) C = F(t),

which is integrated with the Crank-Nicolson midpoint rule.
"""

from dataclasses import dataclass, field
import logging

import numpy as np

from tmwave import fem1d
from tmwave.analysis import RateTable, error_vs_callable
from tmwave.linalg import (BandedSymMatrix, LinAlgError, factorize, is_positive_definite,
                           matvec, min_eig_lower_bound, solve)

log = logging.getLogger(__name__)


class GammaSearchFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class ExactSolution:
    """Evaluators ``u, u_t, u_x, u_tx`` of ``(x, t)``; optional ``u_tt`` for diagnostics."""

    u: object
    u_t: object
    u_x: object
    u_tx: object
    in_space: bool = False


def sin_cos_solution():
    """``u = sin(pi x) cos(t)`` on (0, 1)."""
    pi = np.pi
    return ExactSolution(
        u=lambda x, t: np.sin(pi * x) * np.cos(t),
        u_t=lambda x, t: -np.sin(pi * x) * np.sin(t),
        u_x=lambda x, t: pi * np.cos(pi * x) * np.cos(t),
        u_tx=lambda x, t: -pi * np.cos(pi * x) * np.sin(t),
    )


def quadratic_solution():
    """``u = x (1 - x) cos(t)``: lies in the P2 space at every time on (0, 1)."""
    return ExactSolution(
        u=lambda x, t: x * (1.0 - x) * np.cos(t),
        u_t=lambda x, t: -x * (1.0 - x) * np.sin(t),
        u_x=lambda x, t: (1.0 - 2.0 * x) * np.cos(t),
        u_tx=lambda x, t: -(1.0 - 2.0 * x) * np.sin(t),
        in_space=True,
    )


def interior(a):
    """Restriction of a banded matrix to the interior dofs."""
    return BandedSymMatrix(np.array(a.bands[:, 1:-1]))


def _pin(a):
    """Identity rows/columns on both end points."""
    b = np.array(a.bands)
    n = a.n
    p = a.half_bandwidth
    for i in (0, n - 1):
        b[1:, i] = 0.0
        for k in range(1, p + 1):
            if i + k < n:
                b[k, i + k] = 0.0
        b[0, i] = 1.0
    return BandedSymMatrix(b)


class ProjectionOperators:
    """Assembles ``K``, ``A(t)``, ``B(t)`` and ``F(t)`` for one space and model."""

    def __init__(self, space, model, exact=None):
        self.space, self.model, self.exact = space, model, exact
        self.K = fem1d.assemble_weighted_stiffness(space, 1.0)
        self._xq = space.quad_points
        self._wq = space.quad_weights()

    def A(self, t):
        return fem1d.assemble_weighted_stiffness(
            self.space, lambda x: self.model.inv_rho(x, t))

    def B(self, t):
        return fem1d.assemble_weighted_mass(self.space, lambda x: self.model.b(x, t))

    def system(self, gamma, t):
        return self.K * gamma + self.B(t)

    def F(self, gamma, t):
        ex, xq, sp = self.exact, self._xq, self.space
        grad = self.model.inv_rho(xq, t) * ex.u_x(xq, t) + gamma * ex.u_tx(xq, t)
        out = fem1d.gradient_load_from_values(sp, grad)
        out += fem1d.load_from_values(sp, self.model.b(xq, t) * ex.u_t(xq, t))
        return out


def ritz_project_initial(space, u0, u0_x):
    """Coefficients of the Ritz projection: ``(w' - u0', chi') = 0`` for all ``chi``."""
    K = fem1d.assemble_weighted_stiffness(space, 1.0)
    rhs = fem1d.gradient_load_from_values(space, np.asarray(u0_x(space.quad_points), float)
                                          * np.ones_like(space.quad_points))
    a, b = fem1d.apply_dirichlet(K, rhs)
    return solve(factorize(a, "cholesky"), b)


def estimate_lambda(space, model, T, n_time_samples=8, ops=None):
    """``max_t max(0, -lam_min(B(t))) / lam_min(K)`` from guaranteed eigenvalue bounds."""
    if n_time_samples < 2:
        raise ValueError("n_time_samples must be >= 2")
    ops = ops or ProjectionOperators(space, model)
    k_low = min_eig_lower_bound(interior(ops.K))
    if k_low <= 0:
        raise GammaSearchFailed("could not bound lam_min(K) away from zero")
    worst = 0.0
    for t in np.linspace(0.0, T, n_time_samples):
        worst = max(worst, -min_eig_lower_bound(interior(ops.B(t))))
    return worst / k_low


def select_gamma(space, model, T, n_time_samples=8, check_times=None, max_doublings=10):
    """``gamma = max(1, 2 Lambda)``, doubled until ``gamma K + B(t)`` factors as SPD.

    Positive definiteness is checked at ``check_times`` (default: the sampled
    times) on the interior dofs.
    """
    ops = ProjectionOperators(space, model)
    lam = estimate_lambda(space, model, T, n_time_samples, ops)
    gamma = max(1.0, 2.0 * lam)
    times = np.linspace(0.0, T, n_time_samples) if check_times is None else check_times
    for _ in range(max_doublings + 1):
        if all(is_positive_definite(interior(ops.system(gamma, t))) for t in times):
            return gamma
        gamma *= 2.0
    raise GammaSearchFailed(f"gamma K + B(t) not SPD after {max_doublings} doublings")


@dataclass(frozen=True)
class ProjectionProblem:
    space: fem1d.FeSpace
    model: object
    exact: ExactSolution
    gamma: float
    T: float


@dataclass
class ProjectionTrajectory:
    times: list = field(default_factory=list)
    coefficients: list = field(default_factory=list)
    err_l2: list = field(default_factory=list)
    err_h1: list = field(default_factory=list)
    # (t, L2, H1) of the centred-difference time derivative error
    deriv_errors: list = field(default_factory=list)


def advance_projection(problem, w, t, dt, ops=None):
    """One Crank-Nicolson step of the projection ODE from ``t`` to ``t + dt``."""
    ops = ops or ProjectionOperators(problem.space, problem.model, problem.exact)
    g = problem.gamma
    tm = t + 0.5 * dt
    G = ops.system(g, tm)
    A = ops.A(tm)
    lhs = _pin(G + A * (0.5 * dt))
    rhs = matvec(G - A * (0.5 * dt), w) + dt * ops.F(g, tm)
    rhs[[0, -1]] = 0.0
    try:
        fac = factorize(lhs)
    except LinAlgError as exc:
        raise LinAlgError(f"projection system singular at t={tm}: {exc}") from exc
    return solve(fac, rhs)


def project(problem, dt, sample_every=None, derivative=True):
    """Integrate ``w`` on ``[0, T]`` and record errors at sampled steps.

    ``dt`` is shrunk so ``T`` is a whole number of steps. With ``derivative``
    one extra step past ``T`` is taken so the time derivative can be centred.
    """
    sp, ex = problem.space, problem.exact
    n = max(1, int(np.ceil(problem.T / dt - 1e-9)))
    dt = problem.T / n
    sample_every = sample_every or n
    ops = ProjectionOperators(sp, problem.model, ex)
    w = ritz_project_initial(sp, lambda x: ex.u(x, 0.0), lambda x: ex.u_x(x, 0.0))
    traj = ProjectionTrajectory()

    def record(k, wk):
        t = k * dt
        l2, h1 = error_vs_callable(fem1d.FeFunction(sp, wk), lambda x: ex.u(x, t),
                                   lambda x: ex.u_x(x, t))
        traj.times.append(t)
        traj.coefficients.append(wk.copy())
        traj.err_l2.append(l2)
        traj.err_h1.append(h1)

    record(0, w)
    prev = None
    last = n + 1 if derivative else n
    for k in range(last):
        nxt = advance_projection(problem, w, k * dt, dt, ops)
        if derivative and prev is not None and k % sample_every == 0:
            t = k * dt
            wt = fem1d.FeFunction(sp, (nxt - prev) / (2.0 * dt))
            l2, h1 = error_vs_callable(wt, lambda x: ex.u_t(x, t), lambda x: ex.u_tx(x, t))
            traj.deriv_errors.append((t, l2, h1))
        prev, w = w, nxt
        if k + 1 <= n and (k + 1) % sample_every == 0:
            record(k + 1, w)
    return traj


def projection_rate_study(model, exact, levels, T, dt0, h0=None, exponent=2.0,
                          samples=4, gamma=None, domain=(0.0, 1.0)):
    """Max-in-time projection errors per mesh level with fitted slopes.

    Returns ``(table, deriv_table, info)``; ``deriv_table`` holds the errors
    of the centred-difference time derivative. ``gamma`` defaults to the
    largest ``select_gamma`` value over the levels.
    """
    levels = sorted(levels)
    spaces = [fem1d.FeSpace(fem1d.build_mesh(domain[0], domain[1], n)) for n in levels]
    h0 = h0 or spaces[0].mesh.h
    lambdas = [estimate_lambda(sp, model, T) for sp in spaces]
    if gamma is None:
        gamma = max(select_gamma(sp, model, T) for sp in spaces)
    table, deriv = RateTable(), RateTable()
    for sp in spaces:
        h = sp.mesh.h
        dt = dt0 * (h / h0) ** exponent
        n = max(samples, int(np.ceil(T / dt - 1e-9)))
        n = samples * int(np.ceil(n / samples))
        dt = T / n
        problem = ProjectionProblem(sp, model, exact, gamma, T)
        tr = project(problem, dt, sample_every=n // samples)
        table.add(h, dt, max(tr.err_l2), max(tr.err_h1))
        deriv.add(h, dt, max(e[1] for e in tr.deriv_errors), max(e[2] for e in tr.deriv_errors))
        log.info("level h=%.4g dt=%.3g: L2=%.3e H1=%.3e", h, dt, table.err_l2[-1],
                 table.err_h1[-1])
    info = {"gamma": gamma, "lambda_hat": lambdas, "exact": exact.in_space}
    return table, deriv, info
