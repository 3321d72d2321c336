"""Heat-equation model of the background-difference problem.

Flow a is ``h_t = Delta h``; flow b is ``h_t + mu . grad h = kappa Delta h``
with ``kappa = lam^((2 - gamma)/2)``.  Both start from the same datum.  With
Gaussian data every quantity has a closed form, which makes this module an
exact oracle for the decay-rate harness.

Conventions: the heat kernel ``(4 pi t)^{-3/2} exp(-|x|^2/(4t))`` has
variance ``2t`` per coordinate, so a Gaussian datum of variance ``w^2``
evolves to variance ``w^2 + 2t`` (flow a) or ``w^2 + 2 kappa t`` centred at
``mu t`` (flow b).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize
from scipy.special import roots_legendre

from .fitting import fit_decay, geometric_times
from .grid import ConfigError


@dataclass(frozen=True)
class HeatParams:
    mu: tuple = (0.0, 0.0, 0.0)
    lam: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        mu = self.mu
        if np.isscalar(mu):
            mu = (0.0, 0.0, float(mu))
        object.__setattr__(self, "mu", tuple(float(v) for v in mu))
        if not 1.0 <= self.lam <= 2.0:
            raise ConfigError("lam must lie in [1, 2]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")

    @property
    def kappa(self):
        return self.lam ** ((2.0 - self.gamma) / 2.0)

    @property
    def mu_vec(self):
        return np.asarray(self.mu)

    @property
    def mu_norm(self):
        return float(np.linalg.norm(self.mu))


def _check_t(t):
    if not t > 0:
        raise ValueError("time must be positive")


def gaussian(x, center, var):
    """Isotropic normal density in three dimensions."""
    x = np.asarray(x, dtype=float)
    d = x - np.asarray(center, dtype=float)
    return (2 * np.pi * var) ** -1.5 * np.exp(-np.sum(d * d, axis=-1) / (2 * var))


def kernel(params, which, t, x):
    """Fundamental solution of flow ``a`` or ``b`` at time ``t``."""
    _check_t(t)
    if which == "a":
        return (4 * np.pi * t) ** -1.5 * np.exp(-np.sum(np.asarray(x) ** 2, axis=-1) / (4 * t))
    if which == "b":
        k = params.kappa
        d = np.asarray(x, dtype=float) - params.mu_vec * t
        return (4 * np.pi * k * t) ** -1.5 * np.exp(-np.sum(d * d, axis=-1) / (4 * k * t))
    raise ValueError("which must be 'a' or 'b'")


# --------------------------------------------------------------------------
# norms of a difference of two isotropic Gaussians
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianPair:
    """``N(shift e_3, var_b) - N(0, var_a)`` with amplitudes ``amp_b``, ``amp_a``."""
    shift: float
    var_b: float
    var_a: float
    amp_b: float = 1.0
    amp_a: float = 1.0

    def __call__(self, z, rho):
        pb = (2 * np.pi * self.var_b) ** -1.5 * np.exp(-((z - self.shift) ** 2 + rho ** 2)
                                                        / (2 * self.var_b))
        pa = (2 * np.pi * self.var_a) ** -1.5 * np.exp(-(z ** 2 + rho ** 2) / (2 * self.var_a))
        return self.amp_b * pb - self.amp_a * pa

    def l2(self):
        def overlap(d, v1, v2):
            return (2 * np.pi * (v1 + v2)) ** -1.5 * np.exp(-d * d / (2 * (v1 + v2)))
        val = (self.amp_b ** 2 * overlap(0, self.var_b, self.var_b)
               + self.amp_a ** 2 * overlap(0, self.var_a, self.var_a)
               - 2 * self.amp_a * self.amp_b * overlap(self.shift, self.var_a, self.var_b))
        if val < 1e-13 * (self.amp_b ** 2 * overlap(0, self.var_b, self.var_b)):
            # cancellation: fall back to quadrature
            return float(np.sqrt(self.lp_quadrature(2)))
        return float(np.sqrt(val))

    def _box(self):
        s = np.sqrt(max(self.var_a, self.var_b))
        zlo = min(0.0, self.shift) - 9 * s
        zhi = max(0.0, self.shift) + 9 * s
        return zlo, zhi, 9 * s

    def lp_quadrature(self, p, n=240):
        """``int |D|^p`` over R^3 by composite Gauss-Legendre in (z, rho)."""
        zlo, zhi, rhi = self._box()
        x, w = roots_legendre(8)
        def panels(lo, hi, k):
            e = np.linspace(lo, hi, k + 1)
            a, b = e[:-1, None], e[1:, None]
            return ((a + b) / 2 + (b - a) / 2 * x).ravel(), ((b - a) / 2 * w).ravel()
        z, wz = panels(zlo, zhi, n // 8 * 2)
        r, wr = panels(0.0, rhi, n // 8)
        Z, R = np.meshgrid(z, r, indexing="ij")
        vals = np.abs(self(Z, R)) ** p
        return float(np.einsum("i,j,ij->", wz, 2 * np.pi * r * wr, vals))

    def l1(self):
        return self.lp_quadrature(1)

    def linf(self):
        """Maximum of ``|D|`` from a grid scan polished by a local search."""
        zlo, zhi, rhi = self._box()
        z = np.linspace(zlo, zhi, 401)
        r = np.linspace(0.0, rhi, 201)
        Z, R = np.meshgrid(z, r, indexing="ij")
        A = np.abs(self(Z, R))
        best = float(A.max())
        for flat in np.argsort(A.ravel())[::-1][:4]:
            i, j = np.unravel_index(flat, A.shape)
            res = minimize(lambda p: -abs(self(p[0], abs(p[1]))), [z[i], r[j]],
                           method="Nelder-Mead",
                           options={"xatol": 1e-10 * (zhi - zlo), "fatol": 1e-16 * best,
                                    "maxiter": 4000})
            best = max(best, float(-res.fun))
        return best

    def norm(self, p):
        if p == 1:
            return self.l1()
        if p == 2:
            return self.l2()
        if p in (np.inf, "inf"):
            return self.linf()
        return self.lp_quadrature(p) ** (1.0 / p)


def _axial_pair(params, t, w2, amp=1.0):
    # rotate mu onto e_3: all quantities here are rotation invariant
    return GaussianPair(params.mu_norm * t, w2 + 2 * params.kappa * t, w2 + 2 * t, amp, amp)


def kernel_difference_norm(params, p, t):
    """``|K_b(t) - K_a(t)|_{L^p}``."""
    _check_t(t)
    return _axial_pair(params, t, 0.0).norm(p)


def lemma_envelope(params, p, t):
    """``t^{-(3/2)(1 - 1/p)} (|kappa - 1| + |mu| sqrt(t))``."""
    q = 0.0 if p in (np.inf, "inf") else 1.0 / p
    return t ** (-1.5 * (1 - q)) * (abs(params.kappa - 1) + params.mu_norm * np.sqrt(t))


# --------------------------------------------------------------------------
# Gaussian data
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianDatum:
    """Normalized isotropic Gaussian of variance ``width**2`` per coordinate."""
    width: float = np.sqrt(2.0)
    mass: float = 1.0

    def __call__(self, x):
        return self.mass * gaussian(x, np.zeros(3), self.width ** 2)


def solution(params, h0, which, t, x):
    """Closed-form ``h^a`` or ``h^b`` at time ``t``."""
    w2 = h0.width ** 2
    if which == "a":
        return h0.mass * gaussian(x, np.zeros(3), w2 + 2 * t)
    return h0.mass * gaussian(x, params.mu_vec * t, w2 + 2 * params.kappa * t)


def solution_difference(params, h0, t, x=None):
    """``(h^a, h^b)`` at the points ``x``, or the difference object if ``x`` is None."""
    if x is None:
        return _axial_pair(params, t, h0.width ** 2, h0.mass)
    return solution(params, h0, "a", t, x), solution(params, h0, "b", t, x)


def difference_norms(params, h0, t):
    pair = _axial_pair(params, t, h0.width ** 2, h0.mass)
    return {"Linf": pair.linf(), "L2": pair.l2()}


def convolution_by_quadrature(params, h0, which, t, x, n_r=160, n_c=96):
    """Kernel convolved with the datum by direct quadrature in R^3.

    The datum is radial; spherical coordinates about the origin with the
    polar axis through the (drift-corrected) evaluation point reduce the
    integral to two dimensions.
    """
    _check_t(t)
    x = np.asarray(x, dtype=float)
    if which == "b":
        x = x - params.mu_vec * t
        tt = params.kappa * t
    else:
        tt = t
    X = np.linalg.norm(x)
    R = np.sqrt(h0.width ** 2 + 2 * tt) * 12 + X
    xr, wr = roots_legendre(n_r)
    y = R / 2 * (xr + 1)
    wy = R / 2 * wr
    c, wc = roots_legendre(n_c)
    Y, C = np.meshgrid(y, c, indexing="ij")
    dist2 = X * X + Y * Y - 2 * X * Y * C
    G = (4 * np.pi * tt) ** -1.5 * np.exp(-dist2 / (4 * tt))
    H = h0.mass * (2 * np.pi * h0.width ** 2) ** -1.5 * np.exp(-Y * Y / (2 * h0.width ** 2))
    return float(np.einsum("i,j,ij->", 2 * np.pi * y * y * wy, wc, G * H))


# --------------------------------------------------------------------------
# decay rates
# --------------------------------------------------------------------------

REGIMES = {
    "drift": {"Linf": -1.0, "L2": -0.25},
    "temperature": {"Linf": -1.5, "L2": -0.75},
}


def norm_series(params, h0, times):
    rows = [difference_norms(params, h0, t) for t in times]
    return {k: np.array([r[k] for r in rows]) for k in ("Linf", "L2")}


def rate_table(drift=1e-2, lam=1.5, gamma=0.0, window=(10.0, 1e4), h0=None,
               per_decade=12):
    """Fitted slopes of the difference norms in the drift-only and
    temperature-only regimes, next to the predicted exponents."""
    h0 = GaussianDatum() if h0 is None else h0
    times = geometric_times(window[0], window[1], per_decade)
    regimes = {"drift": HeatParams(mu=drift, lam=1.0, gamma=gamma),
               "temperature": HeatParams(mu=0.0, lam=lam, gamma=gamma)}
    out = {}
    for name, prm in regimes.items():
        series = norm_series(prm, h0, times)
        for key in ("Linf", "L2"):
            f = fit_decay(times, series[key], window)
            out[f"{name}_{key}"] = {"predicted": REGIMES[name][key], "fit": f,
                                    "t": times, "values": series[key]}
    return out


def mixed_slope(mu=0.1, lam=1.5, gamma=0.0, window=(10.0, 1e4), h0=None, which="Linf"):
    h0 = GaussianDatum() if h0 is None else h0
    times = geometric_times(window[0], window[1])
    series = norm_series(HeatParams(mu=mu, lam=lam, gamma=gamma), h0, times)
    return fit_decay(times, series[which], window)


# --------------------------------------------------------------------------
# Duhamel route
# --------------------------------------------------------------------------

def _duhamel_integrand(params, h0, t, s, x):
    """``G_{t-s} * (mu . grad h^b(s) - (kappa - 1) Delta h^b(s))`` at ``x``.

    Convolution commutes with derivatives, so the integrand equals the same
    derivatives applied to the Gaussian ``G_{t-s} * h^b(s)``, which has mean
    ``mu s`` and variance ``w^2 + 2 kappa s + 2 (t - s)``.
    """
    m = params.mu_vec * s
    v = h0.width ** 2 + 2 * params.kappa * s + 2 * (t - s)
    d = np.asarray(x, dtype=float) - m
    d2 = d @ d
    phi = h0.mass * (2 * np.pi * v) ** -1.5 * np.exp(-d2 / (2 * v))
    grad = -d / v * phi
    lap = (d2 / v ** 2 - 3 / v) * phi
    return float(params.mu_vec @ grad - (params.kappa - 1) * lap)


def duhamel_route(params, h0, t, x, epsabs=1e-15, epsrel=1e-12):
    """Split ``h^a - h^b`` at ``t/2`` into the two Duhamel contributions.

    ``h1`` collects ``s`` in ``[0, t/2]`` where the derivatives are carried
    by the heat kernel ``G_{t-s}``; ``h2`` collects ``[t/2, t]`` where they
    act on ``h^b``.  For Gaussian data both forms are the same closed-form
    Gaussian derivative, so only the time integral is numerical.
    """
    _check_t(t)
    f = lambda s: _duhamel_integrand(params, h0, t, s, x)
    h1, e1 = quad(f, 0.0, t / 2, epsabs=epsabs, epsrel=epsrel, limit=200)
    h2, e2 = quad(f, t / 2, t, epsabs=epsabs, epsrel=epsrel, limit=200)
    if max(e1, e2) > 1e-6 * max(abs(h1) + abs(h2), 1e-300):
        raise RuntimeError("Duhamel time quadrature did not converge")
    return h1, h2


def closed_difference(params, h0, t, x):
    """``h^a - h^b`` at ``x`` in closed form."""
    ha, hb = solution_difference(params, h0, t, np.asarray(x, dtype=float))
    return float(ha - hb)
