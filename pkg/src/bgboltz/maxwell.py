"""Background Maxwellians, their ratio and difference, and the bound check.

The reference background is ``a = (rho, mu, lam) = (1, 0, 1)``.  A bulk
velocity is stored as a 3-vector; the sector-reduced experiments place it
along ``e_3``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .grid import ConfigError, japanese


class DomainError(ValueError):
    """Input outside the admissible parameter range."""


@dataclass(frozen=True)
class MaxwellianParams:
    rho: float = 1.0
    mu: tuple = (0.0, 0.0, 0.0)
    lam: float = 1.0

    def __post_init__(self):
        mu = self.mu
        if np.isscalar(mu):
            mu = (0.0, 0.0, float(mu))
        object.__setattr__(self, "mu", tuple(float(v) for v in mu))
        if len(self.mu) != 3:
            raise ConfigError("mu must be a scalar or a 3-vector")
        if not self.rho > 0 or not self.lam > 0:
            raise ConfigError("rho and lam must be positive")

    @property
    def mu_vec(self):
        return np.asarray(self.mu)

    @property
    def mu_norm(self):
        return float(np.linalg.norm(self.mu))

    @property
    def mu_axial(self):
        """Bulk velocity component along the distinguished axis."""
        return self.mu[2]

    def is_axial(self):
        return abs(self.mu[0]) < 1e-15 and abs(self.mu[1]) < 1e-15

    def scaled(self, s):
        """Parameters with ``(rho-1, mu, lam-1)`` multiplied by ``s``."""
        return MaxwellianParams(1.0 + s * (self.rho - 1.0),
                                tuple(s * v for v in self.mu),
                                1.0 + s * (self.lam - 1.0))

    def check_admissible(self, lam_lower=1.0, lam_upper=2.0, strict=True):
        """Admissible box for experiment mode (``lam_lower < lam < lam_upper``)."""
        if strict:
            if not (lam_lower < self.lam < lam_upper):
                raise DomainError(f"lam={self.lam} outside ({lam_lower}, {lam_upper})")
        elif not (1.0 <= self.lam <= 2.0):
            raise DomainError(f"lam={self.lam} outside [1, 2]")
        return True


A = MaxwellianParams()


@dataclass(frozen=True)
class BackgroundPair:
    b: MaxwellianParams
    a: MaxwellianParams = A

    def __post_init__(self):
        if self.a != A:
            raise ConfigError("the reference background must be (1, 0, 1)")

    @property
    def identical(self):
        return macro_error(self.b) == 0.0


def eval_maxwellian(p, xi):
    xi = np.asarray(xi, dtype=float)
    d = xi - p.mu_vec
    return p.rho / (2 * np.pi * p.lam) ** 1.5 * np.exp(-np.sum(d * d, axis=-1) / (2 * p.lam))


def sqrt_ratio(b, xi, strict=True):
    """``sqrt(M_b / M_a)`` from the completed-square closed form.

    The closed form divides by ``lam - 1``; for ``lam == 1`` (allowed only
    when ``strict`` is false) the direct quotient is returned instead.
    """
    xi = np.asarray(xi, dtype=float)
    if b.lam <= 1.0:
        if strict:
            raise DomainError("sqrt_ratio requires lam > 1 in experiment mode")
        return sqrt_ratio_direct(b, xi)
    lm1 = b.lam - 1.0
    mu = b.mu_vec
    d = xi + mu / lm1
    expo = lm1 / (4 * b.lam) * np.sum(d * d, axis=-1) - mu @ mu / (4 * lm1)
    return np.sqrt(b.rho) / b.lam ** 0.75 * np.exp(expo)


def sqrt_ratio_direct(b, xi):
    return np.sqrt(eval_maxwellian(b, xi) / eval_maxwellian(A, xi))


def weighted_difference(b, xi, beta):
    """``<xi>^beta (M_b - M_a) / sqrt(M_a)`` evaluated pointwise."""
    xi = np.asarray(xi, dtype=float)
    r = np.linalg.norm(xi, axis=-1)
    # (M_b - M_a)/sqrt(M_a) = sqrt(M_a) * (M_b/M_a - 1)
    ma = eval_maxwellian(A, xi)
    q = eval_maxwellian(b, xi) / ma - 1.0
    return japanese(r) ** beta * np.sqrt(ma) * q


def macro_error(b):
    """The discrepancy ``|rho - 1| + |lam - 1| + |mu|``."""
    return abs(b.rho - 1.0) + abs(b.lam - 1.0) + b.mu_norm


def lemma_bound_ratio(b, beta, grid, lam_bar):
    """Max over grid nodes of the weighted difference over its envelope.

    The envelope is ``exp(-((2 - lam_bar)/16)|xi|^2) * B`` with ``B`` the
    macroscopic discrepancy.  Nodes are sampled at a few azimuths so that a
    bulk velocity off the axis is handled too.
    """
    if not (1.0 <= b.lam < lam_bar < 2.0 + 1e-15):
        raise DomainError(f"need 1 <= lam < lam_bar <= 2, got lam={b.lam}, lam_bar={lam_bar}")
    B = macro_error(b)
    if B == 0.0:
        raise DomainError("degenerate input: identical backgrounds")
    phis = [0.0] if b.is_axial() else np.linspace(0, 2 * np.pi, 16, endpoint=False)
    best = 0.0
    for phi in phis:
        xi = grid.cartesian(phi)
        r2 = np.sum(xi * xi, axis=-1)
        val = np.abs(weighted_difference(b, xi, beta)) / (np.exp(-(2 - lam_bar) / 16 * r2) * B)
        best = max(best, float(val.max()))
    return best


# --------------------------------------------------------------------------
# mean-value path between the two Maxwellians
# --------------------------------------------------------------------------

def path_maxwellian(b, xi, theta):
    """Maxwellian with parameters interpolated linearly between a and b."""
    rho = 1.0 + theta * (b.rho - 1.0)
    lam = 1.0 + theta * (b.lam - 1.0)
    return eval_maxwellian(MaxwellianParams(rho, tuple(theta * v for v in b.mu), lam), xi)


def mean_value_bracket(b, xi, theta):
    """Logarithmic theta-derivative of the path Maxwellian."""
    xi = np.asarray(xi, dtype=float)
    lm1 = b.lam - 1.0
    T = 1.0 + theta * lm1
    d = xi - theta * b.mu_vec
    return (-1.5 * lm1 / T + (d @ b.mu_vec) / T
            + lm1 * np.sum(d * d, axis=-1) / (2 * T * T)
            + (b.rho - 1.0) / (1.0 + theta * (b.rho - 1.0)))


def mean_value_expansion(b, xi, theta):
    """theta-integrand ``M(theta) * bracket`` whose integral is ``M_b - M_a``."""
    return path_maxwellian(b, xi, theta) * mean_value_bracket(b, xi, theta)


def mean_value_difference(b, xi, epsabs=1e-14, epsrel=1e-13):
    """``M_b - M_a`` at the point ``xi`` by integrating the theta-path."""
    val, _ = quad(lambda th: float(mean_value_expansion(b, xi, th)), 0.0, 1.0,
                  epsabs=epsabs, epsrel=epsrel, limit=200)
    return val
