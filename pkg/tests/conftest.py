import numpy as np
import pytest

from tmwave.linalg import BandedSymMatrix


def random_spd_banded(rng, n, p=2):
    a = np.zeros((n, n))
    for k in range(1, p + 1):
        v = rng.uniform(-1, 1, n - k)
        a += np.diag(v, -k) + np.diag(v, k)
    a += np.diag(np.abs(a).sum(axis=1) + rng.uniform(0.5, 2.0, n))
    return a, BandedSymMatrix.from_dense(a, p)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def manufactured_gaussian(u_expr=None, alpha_rho=0.3, alpha_kappa=0.5):
    """Gaussian-modulated medium with the source that makes ``u_expr`` exact.

    The source of ``((1/kappa) u_t)_t - (u_x / rho)_x = f`` is derived
    symbolically. Returns ``(model, u(x, t), u_x(x, t))``.
    """
    import sympy as sy

    from tmwave.coefficients import Manufactured

    x, t = sy.symbols("x t")
    u = x * (1 - x) * sy.cos(t) if u_expr is None else u_expr(x, t)
    prof = sy.exp(-(x - sy.Rational(1, 2)) ** 2 / (2 * sy.Rational(1, 5) ** 2)) / 2
    rho = 1 + sy.nsimplify(alpha_rho) * prof * sy.sin(2 * sy.pi * t)
    kap = 1 + sy.nsimplify(alpha_kappa) * prof * sy.sin(2 * sy.pi * t)
    f = sy.diff(sy.diff(u, t) / kap, t) - sy.diff(sy.diff(u, x) / rho, x)

    def num(e):
        g = sy.lambdify((x, t), e, "numpy")
        return lambda xs, ts: g(xs, ts) + 0.0 * np.asarray(xs)

    model = Manufactured(num(rho), num(kap), kappa_t=num(sy.diff(kap, t)), source=num(f))
    return model, num(u), num(sy.diff(u, x))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
