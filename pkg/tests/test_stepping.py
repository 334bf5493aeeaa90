import math

import numpy as np
import pytest

from tmwave import coefficients as co
from tmwave import fem1d, stepping
from tmwave.analysis import energy
from tmwave.linalg import NotPositiveDefinite


def space(n, left=0.0, right=1.0, req=None):
    return fem1d.FeSpace(fem1d.build_mesh(left, right, n, req))


def oscillator(sigma=0.0):
    """One element on [0, 1]: the midpoint dof obeys u'' + sigma u' + u = 0."""
    if sigma:
        model = co.Manufactured(lambda x, t: 8.0 + 0 * x, lambda x, t: 1.0 + 0 * x,
                                kappa_t=lambda x, t: 0 * x, sigma=lambda x, t: sigma + 0 * x)
        return stepping.WaveSolver(space(1), model, ("damping",))
    return stepping.WaveSolver(space(1), co.ConstantMedium(8.0, 1.0))


def state(u0, u1, dt):
    return stepping.WaveState(np.array([0.0, u0, 0.0]), np.array([0.0, u1, 0.0]), 1, dt)


class TestStartup:
    def test_zero(self):
        s = stepping.WaveSolver(space(8), co.ConstantMedium())
        st = stepping.startup(s, lambda x: 0 * x, lambda x: 0 * x, 0.01)
        assert not np.any(st.u_prev) and not np.any(st.u_curr)
        assert st.t_curr == pytest.approx(0.01)

    def test_standing_wave(self):
        errs = []
        for n, dt in ((8, 0.02), (16, 0.01)):
            sp = space(n)
            s = stepping.WaveSolver(sp, co.ConstantMedium(), lumped=False)
            st = stepping.startup(s, lambda x: np.sin(np.pi * x), lambda x: 0 * x, dt)
            exact = np.sin(np.pi * sp.dof_coords) * np.cos(np.pi * dt)
            errs.append(np.max(np.abs(st.u_curr - exact)))
        assert errs[0] < 1e-4
        assert errs[1] < errs[0] / 4

    def test_pulse_moves_right(self):
        sp = space(64)
        s = stepping.WaveSolver(sp, co.ConstantMedium())
        u0 = lambda x: np.exp(-(x - 0.3) ** 2 / (2 * 0.01))
        v0 = lambda x: (x - 0.3) / 0.01 * u0(x)
        tr = stepping.run(s, u0, v0, 0.002, 0.2, snapshot_times=[0.2])
        u = tr.snapshots[0][1].dofs
        assert sp.dof_coords[np.argmax(u)] == pytest.approx(0.5, abs=2 * sp.mesh.h)
        assert np.max(u) > 0.9   # one-way: no half-amplitude split


class TestLeapfrog:
    def test_free_drift(self):
        # rho so large that K vanishes to round-off
        s = stepping.WaveSolver(space(4), co.ConstantMedium(1e300, 1.0))
        u_prev = np.r_[0, np.arange(1.0, 8.0), 0]
        u_curr = u_prev + 0.5
        u_curr[[0, -1]] = 0
        st = stepping.WaveState(u_prev, u_curr, 1, 0.1)
        nxt = stepping.leapfrog_step(s, st)
        assert np.allclose(nxt.u_curr[1:-1], (2 * u_curr - u_prev)[1:-1], atol=1e-12)

    def test_harmonic_oscillator(self):
        s = oscillator()
        dt = 0.01
        st = state(1.0, math.cos(dt), dt)
        worst = 0.0
        while st.t_curr < 10.0:
            st = stepping.leapfrog_step(s, st)
            worst = max(worst, abs(st.u_curr[1] - math.cos(st.t_curr)))
        assert worst < 10 * dt ** 2

    def test_unstable_dt_diverges(self):
        s = oscillator()
        dt = 2.2   # above 2 / omega = 2
        st = state(1.0, math.cos(dt), dt)
        with pytest.raises(stepping.Diverged):
            for _ in range(200):
                st = stepping.leapfrog_step(s, st)

    def test_dirichlet_pinned(self):
        sp = space(16)
        s = stepping.WaveSolver(sp, co.SeparableGaussian())
        tr = stepping.run(s, lambda x: np.sin(np.pi * x), lambda x: 0 * x, 0.01, 0.3)
        assert tr.final_state.u_curr[0] == 0 and tr.final_state.u_curr[-1] == 0


class TestLfcn:
    def test_zero_sigma_matches_leapfrog(self):
        sp = space(16)
        u0 = lambda x: np.sin(np.pi * x)
        v0 = lambda x: x * (1 - x)
        a = stepping.run(stepping.WaveSolver(sp, co.SeparableGaussian()), u0, v0, 0.01, 0.5)
        b = stepping.run(stepping.WaveSolver(sp, co.SeparableGaussian(beta_sigma=0.0),
                                             ("damping",)), u0, v0, 0.01, 0.5)
        assert np.allclose(a.final_state.u_curr, b.final_state.u_curr, rtol=0, atol=1e-14)

    def test_damped_energy_monotone(self):
        s = oscillator(0.1)
        dt = 0.01
        st = state(1.0, math.cos(dt), dt)
        e = [stepping.leapfrog_energy(s, st)]
        for _ in range(1000):
            st = stepping.lfcn_step(s, st)
            e.append(stepping.leapfrog_energy(s, st))
        assert np.all(np.diff(e) <= 1e-15)
        assert e[-1] < e[0]

    def test_gain_growth(self):
        s = oscillator(-0.1)
        dt = 0.01
        st = state(1.0, math.cos(dt), dt)
        e0 = stepping.leapfrog_energy(s, st)
        while st.t_curr < 10.0 - 1e-9:
            st = stepping.lfcn_step(s, st)
        growth = math.sqrt(stepping.leapfrog_energy(s, st) / e0)
        assert growth == pytest.approx(math.exp(0.05 * 10.0), rel=0.05)

    def test_nonpositive_diagonal(self):
        s = oscillator(-1000.0)
        st = state(1.0, 1.0, 0.01)
        with pytest.raises(NotPositiveDefinite):
            stepping.lfcn_step(s, st)

    def test_damped_continuous_energy(self):
        sp = space(32)
        model = co.Manufactured(lambda x, t: 1 + 0.2 * np.sin(np.pi * x) + 0 * t,
                                lambda x, t: 1 + 0 * x, kappa_t=lambda x, t: 0 * x,
                                sigma=lambda x, t: 0.5 + 0 * x)
        s = stepping.WaveSolver(sp, model, ("damping",))
        dt = 0.005
        tr = stepping.run(s, lambda x: np.sin(np.pi * x), lambda x: 0 * x, dt, 2.0,
                          energy=lambda st: energy(st, model, sp), energy_every=1)
        e = np.array([v for _, v in tr.energy_series])
        assert np.all(np.diff(e) <= 10 * dt ** 2 * e[0])
        assert e[-1] < 0.5 * e[0]


class TestRun:
    def test_t0(self):
        s = stepping.WaveSolver(space(4), co.ConstantMedium())
        tr = stepping.run(s, lambda x: x * (1 - x), lambda x: 0 * x, 0.1, 0.0, [0.0])
        assert len(tr.snapshots) == 1 and tr.snapshots[0][0] == 0.0
        assert np.allclose(tr.snapshots[0][1].dofs, tr.final_state.u_prev)

    def test_snapshot_bounds(self):
        s = stepping.WaveSolver(space(4), co.ConstantMedium())
        with pytest.raises(ValueError):
            stepping.run(s, lambda x: 0 * x, lambda x: 0 * x, 0.1, 1.0, [1.5])

    def test_nearest_step_snapshots(self):
        s = stepping.WaveSolver(space(8), co.ConstantMedium())
        tr = stepping.run(s, lambda x: np.sin(np.pi * x), lambda x: 0 * x, 0.03, 0.9,
                          [0.1, 0.5, 0.9])
        times = [t for t, _ in tr.snapshots]
        assert len(times) == 3
        dt = tr.final_state.dt
        assert all(abs(a - b) <= dt / 2 + 1e-12 for a, b in zip(times, [0.1, 0.5, 0.9]))

    def test_failing_step_reported(self):
        s = oscillator()
        with pytest.raises(stepping.Diverged) as ei:
            stepping.run(s, lambda x: 4 * x * (1 - x), lambda x: 0 * x, 2.5, 2.5 * 300)
        assert ei.value.step is not None and ei.value.step > 1
        assert ei.value.partial.final_state.step_index == ei.value.step - 1

    def test_deterministic(self):
        sp = space(16)
        s = stepping.WaveSolver(sp, co.SeparableGaussian(beta_sigma=0.3), ("damping",))
        a = stepping.run(s, lambda x: np.sin(np.pi * x), lambda x: 0 * x, 0.01, 0.4)
        b = stepping.run(s, lambda x: np.sin(np.pi * x), lambda x: 0 * x, 0.01, 0.4)
        assert np.array_equal(a.final_state.u_curr, b.final_state.u_curr)

    def test_resonator_snapshot_times(self):
        model = co.ResonatorChain()
        sp = fem1d.FeSpace(fem1d.build_mesh(-500, 500, 2000, model.interfaces))
        s = stepping.WaveSolver(sp, model, ("gain",))
        # cheap check of the plumbing: pulse far from the chain, short horizon
        dt = stepping.stable_dt(sp, model)
        tr = stepping.run(s, lambda x: np.exp(-(x + 450) ** 2 / 2), lambda x: 0 * x, dt, 30.0,
                          snapshot_times=[2.38, 5.0, 11.64, 12.36])
        assert len(tr.snapshots) == 4


class TestStableDt:
    def test_constant(self):
        sp = space(10)
        # smallest dof spacing is h/2 for P2 elements
        assert stepping.stable_dt(sp, co.ConstantMedium()) == pytest.approx(0.25 * sp.mesh.h)

    def test_halving(self):
        a = stepping.stable_dt(space(10), co.ConstantMedium())
        b = stepping.stable_dt(space(20), co.ConstantMedium())
        assert b == pytest.approx(a / 2)

    def test_resonator(self):
        m = co.ResonatorChain()
        sp = fem1d.FeSpace(fem1d.build_mesh(-500, 500, 4000, m.interfaces))
        ts = np.linspace(0, 1, 2001)
        a = (1 + 0.2 * np.cos(2 * np.pi * ts)) / 0.1
        k = (1 + 0.4 * np.cos(2 * np.pi * ts)) / 0.1
        c_oracle = max(1.0, float(np.sqrt(a / k).max()))
        dt = stepping.stable_dt(sp, m)
        assert dt == pytest.approx(0.5 * sp.mesh.h_min / 2 / c_oracle, rel=1e-3)

    def test_power_law(self):
        assert stepping.power_law_dt(0.25, 0.1, 1.0) == pytest.approx(0.1 / 8)


class TestCache:
    @pytest.mark.parametrize("model,forms", [
        (co.ResonatorChain(), ("mass", "stiffness", "gain")),
        (co.SeparableGaussian(beta_sigma=0.3), ("damping",)),
        (co.ConstantMedium(2.0, 3.0), ("mass", "stiffness")),
    ])
    def test_matches_direct(self, model, forms, rng):
        lo, hi = model.domain
        req = model.interfaces if isinstance(model, co.ResonatorChain) else None
        sp = fem1d.FeSpace(fem1d.build_mesh(lo, hi, 2000 if req is not None else 40, req))
        for lumped in (True, False):
            cache = stepping.MatrixCache(sp, model, forms, lumped=lumped)
            for form in forms:
                assert cache.is_separable(form)
                for t in rng.uniform(0, 5, 20):
                    a, b = cache.raw(form, t), cache.direct(form, t)
                    scale = max(np.abs(b).max(), 1e-300)
                    assert np.abs(a - b).max() <= 1e-12 * scale

    def test_gaussian_mass_not_separable(self):
        cache = stepping.MatrixCache(space(8), co.SeparableGaussian(), ("mass", "stiffness"))
        assert not cache.is_separable("mass") and not cache.is_separable("stiffness")


class TestInvariants:
    def test_leapfrog_energy_conserved(self):
        sp = space(20)
        model = co.ConstantMedium()
        s = stepping.WaveSolver(sp, model)
        dt = stepping.stable_dt(sp, model)
        st = stepping.startup(s, lambda x: np.sin(np.pi * x) + 0.3 * np.sin(3 * np.pi * x),
                              lambda x: x * (1 - x), dt)
        e0 = stepping.leapfrog_energy(s, st)
        for _ in range(10000):
            st = stepping.leapfrog_step(s, st)
        worst = abs(stepping.leapfrog_energy(s, st) - e0) / e0
        assert worst <= 1e-10

    def test_time_reversible(self):
        sp = space(20)
        model = co.ConstantMedium(1.3, 0.7)
        s = stepping.WaveSolver(sp, model)
        dt = stepping.stable_dt(sp, model)
        st0 = stepping.startup(s, lambda x: np.sin(np.pi * x), lambda x: np.sin(2 * np.pi * x), dt)
        st = st0
        for _ in range(100):
            st = stepping.leapfrog_step(s, st)
        back = stepping.WaveState(st.u_curr, st.u_prev, 0, dt)
        for _ in range(100):
            back = stepping.leapfrog_step(s, back)
        err = np.linalg.norm(back.u_curr - st0.u_prev) / np.linalg.norm(st0.u_prev)
        assert err <= 1e-8
