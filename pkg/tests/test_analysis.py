import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tmwave import analysis, coefficients as co, fem1d, stepping


def space(n, left=0.0, right=1.0):
    return fem1d.FeSpace(fem1d.build_mesh(left, right, n))


sin = lambda x: np.sin(np.pi * x)
dsin = lambda x: np.pi * np.cos(np.pi * x)


class TestErrorVsCallable:
    def test_in_space(self):
        f = fem1d.interpolate(space(5), lambda x: 3 * x * x - x)
        l2, h1 = analysis.error_vs_callable(f, lambda x: 3 * x * x - x, lambda x: 6 * x - 1)
        assert l2 <= 1e-13 and h1 <= 1e-13

    def test_zero_vs_sine(self):
        f = fem1d.FeFunction(space(8), np.zeros(17))
        l2, h1 = analysis.error_vs_callable(f, sin, dsin)
        assert l2 == pytest.approx(1 / np.sqrt(2), rel=1e-12)
        assert np.sqrt(h1 ** 2 - l2 ** 2) == pytest.approx(np.pi / np.sqrt(2), rel=1e-12)

    def test_interpolation_rate(self):
        hs, errs = [], []
        for n in (4, 8, 16, 32):
            sp = space(n)
            hs.append(sp.mesh.h)
            errs.append(analysis.error_vs_callable(fem1d.interpolate(sp, sin), sin, dsin)[0])
        assert analysis.fit_rate(hs, errs) == pytest.approx(3.0, abs=0.15)


class TestErrorVsReference:
    def test_restriction(self):
        coarse = fem1d.interpolate(space(4), lambda x: x * (1 - x))
        fine_sp = fem1d.FeSpace(coarse.space.mesh.refine(16))
        fine = fem1d.FeFunction(fine_sp, fem1d.evaluate(coarse, fine_sp.dof_coords))
        l2, h1 = analysis.error_vs_reference(coarse, fine)
        assert l2 <= 1e-13 and h1 <= 1e-13

    def test_prolongation_of_nonsmooth(self, rng):
        coarse = fem1d.FeFunction(space(6), rng.standard_normal(13))
        fine_sp = fem1d.FeSpace(coarse.space.mesh.refine(3))
        fine = fem1d.FeFunction(fine_sp, fem1d.evaluate(coarse, fine_sp.dof_coords))
        l2, h1 = analysis.error_vs_reference(coarse, fine)
        assert l2 <= 1e-13 and h1 <= 1e-12

    def test_cross_check(self):
        sp = space(8)
        fine = fem1d.interpolate(fem1d.FeSpace(sp.mesh.refine(16)), sin)
        zero = fem1d.FeFunction(sp, np.zeros(sp.n_dofs))
        a = analysis.error_vs_reference(zero, fine)
        b = analysis.error_vs_callable(zero, sin, dsin)
        assert np.allclose(a, b, rtol=1e-6)

    def test_factor_two(self):
        sp = space(8)
        fine = fem1d.interpolate(fem1d.FeSpace(sp.mesh.refine(2)), sin)
        l2, _ = analysis.error_vs_reference(fem1d.interpolate(sp, sin), fine)
        assert 0 < l2 < 1e-3

    def test_not_nested(self):
        a = fem1d.FeFunction(space(3), np.zeros(7))
        b = fem1d.FeFunction(space(8), np.zeros(17))
        with pytest.raises(analysis.NotNested):
            analysis.error_vs_reference(a, b)


class TestFitRate:
    def test_exact_powers(self):
        h = np.array([0.1, 0.05, 0.025, 0.0125])
        assert analysis.fit_rate(h, 3 * h ** 2) == pytest.approx(2.0, abs=1e-12)
        assert analysis.fit_rate(h, 0.2 * h ** 3) == pytest.approx(3.0, abs=1e-12)

    def test_noise(self):
        r = np.random.default_rng(7)
        h = 0.5 ** np.arange(2, 7)
        worst = 0.0
        for _ in range(500):
            e = h ** 2 * (1 + 0.1 * r.uniform(-1, 1, h.size))
            worst = max(worst, abs(analysis.fit_rate(h, e) - 2.0))
        assert worst <= 0.15

    def test_degenerate(self):
        with pytest.raises(analysis.DegenerateFit):
            analysis.fit_rate([0.1, 0.05, 0.025], [1e-3, 0.0, 1e-5])
        with pytest.raises(analysis.DegenerateFit):
            analysis.fit_rate([0.1, 0.05], [1e-3, 1e-4])


@settings(max_examples=50, deadline=None)
@given(scale=st.floats(1e-6, 1e6), seed=st.integers(0, 1000))
def test_fit_rate_scale_invariant(scale, seed):
    r = np.random.default_rng(seed)
    h = 0.5 ** np.arange(1, 6)
    e = h ** 2.5 * r.uniform(0.5, 2.0, h.size)
    assert analysis.fit_rate(h, e) == pytest.approx(analysis.fit_rate(h, scale * e), abs=1e-9)


class TestRateTable:
    def test_csv_roundtrip(self):
        t = analysis.RateTable()
        for h in (0.1, 0.05, 0.025):
            t.add(h, h ** 1.5, 0.3 * h ** 3, 0.7 * h ** 2)
        text = t.to_csv(["hello"])
        lines = text.splitlines()
        assert lines[0] == "# hello" and lines[1] == "h,dt,err_l2,err_h1"
        assert lines[-1].startswith("# slope_l2=")
        back = analysis.RateTable.from_csv(text)
        assert back.err_l2 == t.err_l2 and back.h == t.h

    def test_h_decreasing(self):
        t = analysis.RateTable()
        t.add(0.1, 0.01, 1.0, 1.0)
        with pytest.raises(ValueError):
            t.add(0.2, 0.01, 1.0, 1.0)

    def test_exact_flag(self):
        t = analysis.RateTable()
        for h in (0.1, 0.05, 0.025):
            t.add(h, 0.01, 1e-14, 2e-14)
        assert t.exact
        assert t.to_csv().splitlines()[-1] == "# exact=true"


class TestEnergy:
    def test_zero(self):
        sp = space(4)
        st = stepping.WaveState(np.zeros(9), np.zeros(9), 1, 0.1)
        assert analysis.energy(st, co.ConstantMedium(), sp) == 0.0

    def test_at_rest(self):
        sp = space(32)
        u = fem1d.interpolate(sp, sin).dofs
        st = stepping.WaveState(u, u, 3, 0.01)
        assert analysis.energy(st, co.ConstantMedium(), sp) == pytest.approx(np.pi ** 2 / 4,
                                                                          rel=1e-5)

    def test_leapfrog_run_within_one_percent(self):
        # the backward-difference velocity lags by dt/2, an O(dt) bias of ~1.2%
        # at 32 elements; 64 elements halve it
        sp = space(64)
        model = co.ConstantMedium()
        s = stepping.WaveSolver(sp, model)
        dt = stepping.stable_dt(sp, model)
        tr = stepping.run(s, sin, lambda x: 0 * x, dt, 10.0,
                          energy=lambda st: analysis.energy(st, model, sp), energy_every=10)
        e = np.array([v for _, v in tr.energy_series])
        assert np.max(np.abs(e - np.pi ** 2 / 4)) <= 0.01 * np.pi ** 2 / 4

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10 ** 6))
    def test_nonnegative(self, seed):
        r = np.random.default_rng(seed)
        sp = space(6)
        st = stepping.WaveState(r.standard_normal(13), r.standard_normal(13), 2, 0.05)
        assert analysis.energy(st, co.SeparableGaussian(), sp) >= 0.0
