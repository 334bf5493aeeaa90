"""Space-time material models for ``(1/kappa) u_tt + b u_t + sigma u_t - (u_x/rho)_x = f``.

Every model evaluates vectorised over ``x`` at a scalar time ``t``. The
gain/loss weight is ``b = d/dt (1/kappa) = -kappa_t / kappa**2``.

Assembled forms are named by their weight:

``mass``       1/kappa
``stiffness``  1/rho
``gain``       b
``damping``    sigma
``rho``, ``kappa``  the coefficients themselves (only the Gaussian model
                    declares these as separable)
"""

from dataclasses import dataclass
import math

import numpy as np

FORMS = ("mass", "stiffness", "gain", "damping")


class CoefficientError(ValueError):
    pass


class MissingDerivative(CoefficientError):
    pass


@dataclass(frozen=True)
class SeparableForm:
    """``weight(x, t) = static(x) + modulation(t) * spatial(x)``."""

    static: object
    spatial: object
    modulation: object

    def __call__(self, x, t):
        return self.static(x) + self.modulation(t) * self.spatial(x)


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _zero_t(t):
    return 0.0


def _const(c):
    def f(x):
        return np.full(np.shape(x), float(c))
    return f


class CoefficientModel:
    """Base class. Subclasses provide ``rho``, ``kappa`` and ``kappa_t``."""

    domain = (0.0, 1.0)
    # sampled time window used for positivity bounds and CFL estimates
    sample_period = 1.0
    has_source = False

    def rho(self, x, t):
        raise NotImplementedError

    def kappa(self, x, t):
        raise NotImplementedError

    def kappa_t(self, x, t):
        raise MissingDerivative(f"{type(self).__name__} has no kappa_t")

    def inv_rho(self, x, t):
        return 1.0 / self.rho(x, t)

    def inv_kappa(self, x, t):
        return 1.0 / self.kappa(x, t)

    def b(self, x, t):
        k = self.kappa(x, t)
        return -self.kappa_t(x, t) / (k * k)

    def sigma(self, x, t):
        return _zero(x)

    def source(self, x, t):
        return _zero(x)

    def wave_speed(self, x, t):
        return np.sqrt(self.kappa(x, t) / self.rho(x, t))

    def weight(self, form, x, t):
        return {
            "mass": self.inv_kappa,
            "stiffness": self.inv_rho,
            "gain": self.b,
            "damping": self.sigma,
            "rho": self.rho,
            "kappa": self.kappa,
        }[form](x, t)

    def separable_parts(self):
        """Map form name -> ``SeparableForm`` or ``None``; ``None`` overall if undeclared."""
        return None

    def sample_grid(self, n=1000, n_t=50):
        lo, hi = self.domain
        xs = np.linspace(lo, hi, n)
        ts = np.linspace(0.0, self.sample_period, n_t)
        return xs, ts

    def _check_positive(self):
        xs, ts = self.sample_grid()
        lo, hi = np.inf, 0.0
        for t in ts:
            r = np.asarray(self.rho(xs, t))
            k = np.asarray(self.kappa(xs, t))
            if not (np.all(np.isfinite(r)) and np.all(np.isfinite(k))):
                raise CoefficientError(f"non-finite coefficient at t={t}")
            if np.any(r <= 0) or np.any(k <= 0):
                raise CoefficientError(f"rho and kappa must be positive (violated at t={t})")
            inv = np.concatenate([1.0 / r, 1.0 / k])
            lo, hi = min(lo, inv.min()), max(hi, inv.max())
        self.bounds = (float(lo), float(hi))


class ConstantMedium(CoefficientModel):
    def __init__(self, rho0=1.0, kappa0=1.0, domain=(0.0, 1.0)):
        self.rho0, self.kappa0 = float(rho0), float(kappa0)
        self.domain = tuple(domain)
        self._check_positive()

    def rho(self, x, t):
        return np.full(np.shape(x), self.rho0)

    def kappa(self, x, t):
        return np.full(np.shape(x), self.kappa0)

    def kappa_t(self, x, t):
        return _zero(x)

    def b(self, x, t):
        return _zero(x)

    def separable_parts(self):
        parts = {
            "mass": SeparableForm(_const(1.0 / self.kappa0), _zero, _zero_t),
            "stiffness": SeparableForm(_const(1.0 / self.rho0), _zero, _zero_t),
            "gain": SeparableForm(_zero, _zero, _zero_t),
            "damping": SeparableForm(_zero, _zero, _zero_t),
            "rho": SeparableForm(_const(self.rho0), _zero, _zero_t),
            "kappa": SeparableForm(_const(self.kappa0), _zero, _zero_t),
        }
        return parts


class SeparableGaussian(CoefficientModel):
    """Background 1 perturbed by ``alpha * f(x) g(t)`` in rho and kappa.

    ``f(x) = exp(-(x - x_r)^2 / (2 sigma_r^2)) / 2`` and ``g(t) = sin(2 pi t)``.
    The optional damping coefficient is ``beta_sigma * f(x) g(t)``.
    """

    def __init__(self, alpha_rho=0.3, alpha_kappa=0.5, beta_sigma=0.0,
                 x_r=0.5, sigma_r=0.2, domain=(0.0, 1.0)):
        self.alpha_rho = float(alpha_rho)
        self.alpha_kappa = float(alpha_kappa)
        self.beta_sigma = float(beta_sigma)
        self.x_r, self.sigma_r = float(x_r), float(sigma_r)
        self.domain = tuple(domain)
        self._memo = {}
        self._check_positive()

    def profile(self, x):
        # FE spaces pass the same read-only point arrays every step
        hit = self._memo.get(id(x))
        if hit is not None and hit[0] is x:
            return hit[1]
        xa = np.asarray(x, dtype=float)
        val = 0.5 * np.exp(-(xa - self.x_r) ** 2 / (2.0 * self.sigma_r ** 2))
        if isinstance(x, np.ndarray) and not x.flags.writeable:
            if len(self._memo) > 16:
                self._memo.clear()
            self._memo[id(x)] = (x, val)
        return val

    @staticmethod
    def modulation(t):
        return math.sin(2.0 * math.pi * t)

    @staticmethod
    def modulation_rate(t):
        return 2.0 * math.pi * math.cos(2.0 * math.pi * t)

    def rho(self, x, t):
        return 1.0 + self.alpha_rho * self.profile(x) * self.modulation(t)

    def kappa(self, x, t):
        return 1.0 + self.alpha_kappa * self.profile(x) * self.modulation(t)

    def kappa_t(self, x, t):
        return self.alpha_kappa * self.profile(x) * self.modulation_rate(t)

    def sigma(self, x, t):
        return self.beta_sigma * self.profile(x) * self.modulation(t)

    def separable_parts(self):
        # 1/rho, 1/kappa and b are not affine in g(t)
        one = _const(1.0)
        return {
            "mass": None,
            "stiffness": None,
            "gain": None,
            "damping": SeparableForm(_zero, lambda x: self.beta_sigma * self.profile(x),
                                     self.modulation),
            "rho": SeparableForm(one, lambda x: self.alpha_rho * self.profile(x),
                                 self.modulation),
            "kappa": SeparableForm(one, lambda x: self.alpha_kappa * self.profile(x),
                                   self.modulation),
        }


class ResonatorChain(CoefficientModel):
    """Unit background with piecewise-constant modulated resonators.

    Inside each resonator ``rho = rho_r / (1 + alpha_rho cos(omega_rho t))`` and
    likewise for kappa, so ``1/rho`` and ``1/kappa`` are affine in the cosine.
    """

    def __init__(self, intervals=None, rho_r=0.1, kappa_r=0.1, alpha_rho=0.2,
                 alpha_kappa=0.4, omega_rho=2.0 * math.pi, omega_kappa=2.0 * math.pi,
                 rho0=1.0, kappa0=1.0, domain=(-500.0, 500.0)):
        if intervals is None:
            intervals = chain_intervals()
        iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
        if np.any(iv[:, 1] <= iv[:, 0]) or np.any(iv[1:, 0] < iv[:-1, 1]):
            raise CoefficientError("resonator intervals must be ordered and disjoint")
        self.intervals = iv
        self.rho_r, self.kappa_r = float(rho_r), float(kappa_r)
        self.alpha_rho, self.alpha_kappa = float(alpha_rho), float(alpha_kappa)
        self.omega_rho, self.omega_kappa = float(omega_rho), float(omega_kappa)
        self.rho0, self.kappa0 = float(rho0), float(kappa0)
        self.domain = tuple(domain)
        periods = [2 * math.pi / w for w in (self.omega_rho, self.omega_kappa) if w > 0]
        self.sample_period = max(periods) if periods else 1.0
        self._check_positive()

    @property
    def interfaces(self):
        return self.intervals.ravel()

    def sample_grid(self, n=1000, n_t=50):
        xs, ts = super().sample_grid(n, n_t)
        mids = self.intervals.mean(axis=1)
        return np.sort(np.concatenate([xs, mids])), ts

    def indicator(self, x):
        x = np.asarray(x, dtype=float)
        lo = self.intervals[:, 0]
        hi = self.intervals[:, 1]
        i = np.searchsorted(lo, x, side="right") - 1
        inside = i >= 0
        ic = np.clip(i, 0, None)
        return (inside & (x < hi[ic])).astype(float)

    def _inv_rho_mod(self, t):
        return math.cos(self.omega_rho * t)

    def _inv_kappa_mod(self, t):
        return math.cos(self.omega_kappa * t)

    def _gain_mod(self, t):
        return math.sin(self.omega_kappa * t)

    def inv_rho(self, x, t):
        chi = self.indicator(x)
        inside = (1.0 + self.alpha_rho * self._inv_rho_mod(t)) / self.rho_r
        return (1.0 - chi) / self.rho0 + chi * inside

    def inv_kappa(self, x, t):
        chi = self.indicator(x)
        inside = (1.0 + self.alpha_kappa * self._inv_kappa_mod(t)) / self.kappa_r
        return (1.0 - chi) / self.kappa0 + chi * inside

    def rho(self, x, t):
        return 1.0 / self.inv_rho(x, t)

    def kappa(self, x, t):
        return 1.0 / self.inv_kappa(x, t)

    def b(self, x, t):
        coef = -self.alpha_kappa * self.omega_kappa / self.kappa_r
        return self.indicator(x) * coef * self._gain_mod(t)

    def kappa_t(self, x, t):
        k = self.kappa(x, t)
        return -self.b(x, t) * k * k

    def separable_parts(self):
        ind = self.indicator

        def static(inner, outer):
            return lambda x: (1.0 - ind(x)) * outer + ind(x) * inner

        return {
            "mass": SeparableForm(static(1.0 / self.kappa_r, 1.0 / self.kappa0),
                                  lambda x: ind(x) * self.alpha_kappa / self.kappa_r,
                                  self._inv_kappa_mod),
            "stiffness": SeparableForm(static(1.0 / self.rho_r, 1.0 / self.rho0),
                                       lambda x: ind(x) * self.alpha_rho / self.rho_r,
                                       self._inv_rho_mod),
            "gain": SeparableForm(_zero,
                                  lambda x: ind(x) * (-self.alpha_kappa * self.omega_kappa
                                                      / self.kappa_r),
                                  self._gain_mod),
            "damping": SeparableForm(_zero, _zero, _zero_t),
            "rho": None,
            "kappa": None,
        }


def chain_intervals(n_resonators=50, length=1.0, gap=1.0, start=0.0):
    """Resonators ``(start + i (length + gap), ... + length)``, ``i = 0..n-1``."""
    i = np.arange(n_resonators)
    lo = start + i * (length + gap)
    return np.stack([lo, lo + length], axis=1)


class Manufactured(CoefficientModel):
    """Caller-supplied evaluators ``rho(x, t)``, ``kappa(x, t)`` and optionally
    ``kappa_t``, ``sigma`` and ``source``."""

    def __init__(self, rho, kappa, kappa_t=None, sigma=None, source=None,
                 domain=(0.0, 1.0), sample_period=1.0, separable=None):
        self._rho, self._kappa = rho, kappa
        self._kappa_t, self._sigma, self._source = kappa_t, sigma, source
        self.domain = tuple(domain)
        self.sample_period = float(sample_period)
        self._separable = separable
        self.has_source = source is not None
        self._check_positive()

    def rho(self, x, t):
        return np.broadcast_to(np.asarray(self._rho(x, t), dtype=float), np.shape(x))

    def kappa(self, x, t):
        return np.broadcast_to(np.asarray(self._kappa(x, t), dtype=float), np.shape(x))

    def kappa_t(self, x, t):
        if self._kappa_t is None:
            raise MissingDerivative("Manufactured model built without kappa_t")
        return np.broadcast_to(np.asarray(self._kappa_t(x, t), dtype=float), np.shape(x))

    def sigma(self, x, t):
        if self._sigma is None:
            return _zero(x)
        return np.broadcast_to(np.asarray(self._sigma(x, t), dtype=float), np.shape(x))

    def source(self, x, t):
        if self._source is None:
            return _zero(x)
        return np.broadcast_to(np.asarray(self._source(x, t), dtype=float), np.shape(x))

    def separable_parts(self):
        return self._separable


def eval_inv_rho(m, x, t):
    return m.inv_rho(x, t)


def eval_inv_kappa(m, x, t):
    return m.inv_kappa(x, t)


def eval_b(m, x, t):
    return m.b(x, t)


def eval_sigma(m, x, t):
    return m.sigma(x, t)


def separable_parts(m):
    return m.separable_parts()
