"""Velocity-space discretization, nodal functions and velocity norms.

A velocity ``xi`` is written in spherical coordinates about a distinguished
axis (``e_3``) relative to a grid center ``c e_3``::

    xi = c e_3 + s (sin(theta) cos(phi), sin(theta) sin(phi), cos(theta))

and a function is stored in one azimuthal sector ``m`` as
``f(xi) = g(s, cos(theta)) cos(m phi)``.  The nodal values ``g`` live on a
tensor grid of speed nodes and cosine nodes.

Speed nodes form a Gauss rule for the weight ``s**2 exp(-s**2 / (2 T))`` on
``[0, s_max]`` (Golub-Welsch on a discretized Stieltjes procedure), so that
moments of ``sqrt(M) * polynomial`` products are integrated exactly.  Cosine
nodes are Gauss-Legendre.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import eigh_tridiagonal


class ConfigError(ValueError):
    """Invalid configuration or precondition violation."""


class GridMismatchError(ValueError):
    """Two grid functions do not share a grid or sector."""


# --------------------------------------------------------------------------
# quadrature rules
# --------------------------------------------------------------------------

def _lanczos(x, w, n):
    """Jacobi matrix of the discrete measure sum_k w_k delta(x_k) (RKPW)."""
    # Lanczos with full reorthogonalization on diag(x), starting vector sqrt(w)
    q = np.sqrt(w)
    beta0 = np.linalg.norm(q)
    q = q / beta0
    Q = np.zeros((x.size, n))
    alpha = np.zeros(n)
    beta = np.zeros(n)
    prev = np.zeros_like(q)
    b = 0.0
    for k in range(n):
        Q[:, k] = q
        v = x * q
        alpha[k] = q @ v
        v = v - alpha[k] * q - b * prev
        v -= Q[:, : k + 1] @ (Q[:, : k + 1].T @ v)
        v -= Q[:, : k + 1] @ (Q[:, : k + 1].T @ v)
        b = np.linalg.norm(v)
        beta[k] = b
        prev, q = q, v / b
    return alpha, beta[: n - 1], beta0 ** 2


def maxwell_gauss_rule(n, s_max, temperature=1.0, n_fine=None):
    """Gauss rule for ``int_0^s_max f(s) s^2 exp(-s^2/(2T)) ds``.

    Returns nodes and the *plain* weights ``w_i`` such that
    ``sum_i w_i g(s_i) ~ int_0^s_max g(s) s^2 ds``.
    """
    if n_fine is None:
        n_fine = max(600, 25 * n)
    # fine composite Gauss-Legendre discretization of the weight
    n_panels = 8
    xg, wg = leggauss(n_fine // n_panels)
    edges = np.linspace(0.0, s_max, n_panels + 1)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        xs.append(0.5 * (hi - lo) * xg + 0.5 * (hi + lo))
        ws.append(0.5 * (hi - lo) * wg)
    x = np.concatenate(xs)
    w = np.concatenate(ws) * x ** 2 * np.exp(-x ** 2 / (2.0 * temperature))
    alpha, beta, mu0 = _lanczos(x, w, n)
    nodes, vecs = eigh_tridiagonal(alpha, beta)
    lam = mu0 * vecs[0, :] ** 2
    plain = lam * np.exp(nodes ** 2 / (2.0 * temperature))
    return nodes, plain


# --------------------------------------------------------------------------
# barycentric interpolation
# --------------------------------------------------------------------------

def barycentric_weights(nodes):
    nodes = np.asarray(nodes, dtype=float)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    # scale to avoid overflow for larger node counts
    diff = diff / (nodes.max() - nodes.min()) * 4.0
    return 1.0 / np.prod(diff, axis=1)


def lagrange_matrix(nodes, bw, x):
    """Matrix ``E[p, j] = l_j(x_p)`` of Lagrange basis values (barycentric)."""
    x = np.asarray(x, dtype=float)
    d = x[:, None] - nodes[None, :]
    exact = d == 0.0
    d[exact] = 1.0
    tmp = bw[None, :] / d
    E = tmp / tmp.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    if rows.any():
        E[rows] = exact[rows].astype(float)
    return E


# --------------------------------------------------------------------------
# grid
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VelocityGrid:
    """Tensor velocity grid (speed x cosine) for sector-reduced functions.

    ``speed_weights`` include the ``s**2`` Jacobian; the full quadrature of a
    sector-``m`` product ``f * conj(g)`` is ``A_m * sum(W * f * conj(g))``
    with ``A_0 = 2 pi`` and ``A_m = pi`` otherwise.
    """

    n_speed: int
    n_cosine: int
    s_max: float = 8.0
    sector: int = 0
    temperature: float = 1.0
    center: float = 0.0
    speed_nodes: np.ndarray = field(default=None, repr=False, compare=False)
    speed_weights: np.ndarray = field(default=None, repr=False, compare=False)
    cosine_nodes: np.ndarray = field(default=None, repr=False, compare=False)
    cosine_weights: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def cutoff_speed(self):
        return self.s_max

    @property
    def azimuthal_sector(self):
        return self.sector

    @property
    def size(self):
        return self.n_speed * self.n_cosine

    @property
    def shape(self):
        return (self.n_speed, self.n_cosine)

    def key(self):
        return (self.n_speed, self.n_cosine, float(self.s_max),
                float(self.temperature), float(self.center))

    def same_nodes(self, other):
        return self.key() == other.key()

    def with_sector(self, m):
        return build_grid(self.n_speed, self.n_cosine, self.s_max, m,
                          temperature=self.temperature, center=self.center)

    # node arrays flattened in (speed, cosine) C-order
    @property
    def s(self):
        return np.repeat(self.speed_nodes, self.n_cosine)

    @property
    def c(self):
        return np.tile(self.cosine_nodes, self.n_speed)

    @property
    def weights(self):
        """Flattened tensor weights (without the azimuthal factor)."""
        return np.outer(self.speed_weights, self.cosine_weights).ravel()

    def azimuthal_factor(self, m=None):
        m = self.sector if m is None else m
        return 2.0 * np.pi if m == 0 else np.pi

    def cartesian(self, phi=0.0):
        """Cartesian node coordinates (N, 3) at azimuth ``phi``."""
        s, c = self.s, self.c
        st = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
        return np.stack([s * st * np.cos(phi), s * st * np.sin(phi),
                         self.center + s * c], axis=-1)

    def local_coords(self, points):
        """Speed, cosine and azimuth of Cartesian ``points`` about the center."""
        p = np.asarray(points, dtype=float)
        x, y, z = p[..., 0], p[..., 1], p[..., 2] - self.center
        rho2 = x * x + y * y
        s = np.sqrt(rho2 + z * z)
        with np.errstate(invalid="ignore", divide="ignore"):
            c = np.where(s > 0, z / np.where(s > 0, s, 1.0), 1.0)
        phi = np.arctan2(y, x)
        return s, np.clip(c, -1.0, 1.0), phi

    # ----------------------------------------------------------------- interp
    def envelope(self, s):
        """Interpolation envelope ``exp(-s^2/(4T))`` (square-root Maxwellian)."""
        return np.exp(-np.asarray(s) ** 2 / (4.0 * self.temperature))

    def interpolation_factors(self, points, m=None, envelope=True):
        """Factors to evaluate sector-``m`` nodal data at Cartesian points.

        Returns ``(Es, Ec, scale)`` such that the value of a nodal function
        ``g`` (shape ``(n_speed, n_cosine)``) at point ``p`` is
        ``scale[p] * Es[p] @ (g / node_scale) @ Ec[p]`` where ``node_scale``
        is given by :meth:`node_scale`.
        """
        m = self.sector if m is None else m
        s, c, phi = self.local_coords(points)
        inside = s <= self.s_max
        Es = lagrange_matrix(self.speed_nodes, self._bw_s, np.minimum(s, self.s_max))
        Ec = lagrange_matrix(self.cosine_nodes, self._bw_c, c)
        scale = np.cos(m * phi) * (1.0 - c * c) ** (0.5 * m)
        if envelope:
            scale = scale * self.envelope(s)
        scale = np.where(inside, scale, 0.0)
        return Es, Ec, scale

    def node_scale(self, m=None, envelope=True):
        m = self.sector if m is None else m
        sc = (1.0 - self.cosine_nodes ** 2) ** (0.5 * m)
        out = np.outer(np.ones(self.n_speed), sc)
        if envelope:
            out = out * self.envelope(self.speed_nodes)[:, None]
        return out

    def evaluate(self, f, points, envelope=True):
        """Evaluate a :class:`GridFunction` at Cartesian points."""
        Es, Ec, scale = self.interpolation_factors(points, f.sector, envelope)
        h = f.values.reshape(self.shape) / self.node_scale(f.sector, envelope)
        return scale * np.einsum("pa,ab,pb->p", Es, h, Ec)

    def __post_init__(self):
        bw_s = barycentric_weights(self.speed_nodes)
        bw_c = barycentric_weights(self.cosine_nodes)
        object.__setattr__(self, "_bw_s", bw_s)
        object.__setattr__(self, "_bw_c", bw_c)

    # ------------------------------------------------------------ config I/O
    def to_config(self):
        return {"n_speed": str(self.n_speed), "n_cosine": str(self.n_cosine),
                "s_max": repr(float(self.s_max)), "sectors": str(self.sector)}

    @classmethod
    def from_config(cls, block):
        try:
            return build_grid(int(block["n_speed"]), int(block["n_cosine"]),
                              float(block.get("s_max", 8.0)),
                              int(str(block.get("sectors", "0")).split(",")[0]))
        except KeyError as exc:
            raise ConfigError(f"missing grid key {exc.args[0]!r}") from None


def build_grid(n_speed, n_cosine, s_max=8.0, sector=0, temperature=1.0,
               center=0.0):
    """Construct a :class:`VelocityGrid`.

    ``temperature`` and ``center`` give grids adapted to a shifted and
    rescaled Maxwellian (nodes scale with ``sqrt(temperature)``).
    """
    if int(n_speed) < 4 or int(n_cosine) < 4:
        raise ConfigError("n_speed and n_cosine must be at least 4")
    if not s_max >= 6.0 * np.sqrt(temperature) - 1e-12:
        raise ConfigError("s_max must be at least 6 (in thermal units)")
    if int(sector) < 0:
        raise ConfigError("sector must be non-negative")
    if temperature <= 0:
        raise ConfigError("temperature must be positive")
    sn, sw = maxwell_gauss_rule(int(n_speed), float(s_max), float(temperature))
    cn, cw = leggauss(int(n_cosine))
    return VelocityGrid(int(n_speed), int(n_cosine), float(s_max), int(sector),
                        float(temperature), float(center), sn, sw, cn, cw)


# --------------------------------------------------------------------------
# grid functions
# --------------------------------------------------------------------------

@dataclass
class GridFunction:
    """Nodal values of a sector function ``g(s, c) cos(m phi)``."""

    grid: VelocityGrid
    values: np.ndarray
    sector: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values).reshape(-1)
        if self.values.size != self.grid.size:
            raise GridMismatchError("value count differs from grid node count")

    def _check(self, other):
        if not self.grid.same_nodes(other.grid) or self.sector != other.sector:
            raise GridMismatchError("grid functions live on different grids or sectors")

    def __add__(self, other):
        self._check(other)
        return GridFunction(self.grid, self.values + other.values, self.sector)

    def __sub__(self, other):
        self._check(other)
        return GridFunction(self.grid, self.values - other.values, self.sector)

    def __mul__(self, a):
        return GridFunction(self.grid, self.values * a, self.sector)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def copy(self):
        return GridFunction(self.grid, self.values.copy(), self.sector)


def from_callable(grid, func, sector=None):
    """Sample ``func(s, c)`` (the sector profile ``g``) at the grid nodes."""
    m = grid.sector if sector is None else sector
    return GridFunction(grid, func(grid.s, grid.c), m)


def inner(f, g):
    """Quadrature of ``int f conj(g) dxi`` for two functions in one sector."""
    f._check(g)
    W = f.grid.weights
    return f.grid.azimuthal_factor(f.sector) * np.sum(W * f.values * np.conj(g.values))


def japanese(s):
    return np.sqrt(1.0 + np.asarray(s) ** 2)


@dataclass(frozen=True)
class WeightSpec:
    """Exponential velocity weight ``exp(kappa0 |xi|^2 + kappa . xi + kappa4)``."""

    kappa0: float = 0.0
    kappa: Sequence[float] = (0.0, 0.0, 0.0)
    kappa4: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.kappa0 < 0.125):
            raise ConfigError("kappa0 must lie in [0, 1/8)")
        if self.beta < 0:
            raise ConfigError("beta must be non-negative")

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        k = np.asarray(self.kappa, dtype=float)
        return np.exp(self.kappa0 * np.sum(xi * xi, axis=-1) + xi @ k + self.kappa4)


@dataclass(frozen=True)
class NormSpec:
    kind: str
    param: float = 0.0
    weight: Optional[WeightSpec] = None


def L2():
    return NormSpec("L2")


def Lsigma(gamma):
    return NormSpec("Lsigma", gamma)


def LinfBeta(beta):
    return NormSpec("LinfBeta", beta)


def LinfWeighted(weight, beta=None):
    return NormSpec("LinfWeighted", weight.beta if beta is None else beta, weight)


def norm(f, which=None, n_phi=64):
    """Velocity norms of a sector function.

    ``L2`` and ``Lsigma(gamma)`` use the quadrature; the sup-norms are the
    maximum over nodes (and, for nonzero sectors or a non-axial weight, over
    a sample of ``n_phi`` azimuths).
    """
    which = L2() if which is None else which
    grid = f.grid
    if which.kind == "L2":
        return float(np.sqrt(max(inner(f, f).real, 0.0)))
    if which.kind == "Lsigma":
        w = japanese(grid.s) ** (which.param / 2.0)
        g = GridFunction(grid, f.values * w, f.sector)
        return float(np.sqrt(max(inner(g, g).real, 0.0)))
    if which.kind == "LinfBeta":
        # |cos(m phi)| attains 1 at phi=0
        return float(np.max(japanese(grid.s) ** which.param * np.abs(f.values)))
    if which.kind == "LinfWeighted":
        best = 0.0
        phis = np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False)
        for phi in phis:
            xi = grid.cartesian(phi)
            val = (which.weight.value(xi) * japanese(np.linalg.norm(xi, axis=-1)) ** which.param
                   * np.abs(f.values * np.cos(f.sector * phi)))
            best = max(best, float(val.max()))
        return best
    raise ConfigError(f"unknown norm {which.kind!r}")


# --------------------------------------------------------------------------
# collision invariants
# --------------------------------------------------------------------------

def sqrt_maxwellian(s):
    """Square root of the standard Maxwellian as a function of speed."""
    return (2.0 * np.pi) ** (-0.75) * np.exp(-np.asarray(s) ** 2 / 4.0)


def chi_basis(grid, m=None):
    """Orthonormal collision invariants (standard Maxwellian) in sector ``m``.

    Sector 0 holds ``chi0``, ``chi3`` and ``chi4``; sector 1 holds ``chi1``
    (its ``sin`` partner ``chi2`` has the same profile).  Values are given
    in absolute velocity (the grid center is accounted for).
    """
    m = grid.sector if m is None else m
    xi = grid.cartesian()
    r2 = np.sum(xi * xi, axis=-1)
    sm = (2.0 * np.pi) ** (-0.75) * np.exp(-r2 / 4.0)
    out = {}
    if m == 0:
        out["chi0"] = GridFunction(grid, sm, 0)
        out["chi3"] = GridFunction(grid, xi[:, 2] * sm, 0)
        out["chi4"] = GridFunction(grid, (r2 - 3.0) / np.sqrt(6.0) * sm, 0)
    elif m == 1:
        out["chi1"] = GridFunction(grid, xi[:, 0] * sm, 1)
    return out


def discrete_orthonormal(funcs):
    """Gram-Schmidt (twice) in the discrete inner product."""
    basis = []
    for f in funcs:
        v = f.copy()
        for _ in range(2):
            for b in basis:
                v = v - b * inner(v, b)
        nv = norm(v)
        if nv > 1e-14:
            basis.append(v * (1.0 / nv))
    return basis
