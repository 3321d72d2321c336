"""Linearized collision operator, its gain/loss parts and the bilinear term.

For a background ``b = (rho, mu, lam)`` and cross-section ``B(cos)`` with
``|xi - xi_*|^gamma`` hardness the operator is ``L = -nu + K`` with
``K = K_2 - K_1``.  The kernels are

* ``k_1(xi, eta) = 4 pi Bbar |xi - eta|^gamma sqrt(M_b(xi)) sqrt(M_b(eta))``
* ``k_2(xi, eta) = rho (2 pi lam)^{-3/2} lam^{gamma/2}
  exp(-d^2/(8 lam) - m_par^2/(2 lam)) G(d/sqrt(lam), a/sqrt(lam))``

where ``d = |xi - eta|``, ``m = (xi + eta)/2 - mu`` is split into its
component ``m_par`` along ``xi - eta`` and the length ``a`` of the
orthogonal part, and

``G(d, a) = int_{R^2} [2 B(d/V)/d^2 + 2 B(|z|/V)/(d |z|)] V^gamma
exp(-|z - a e|^2 / 2) dz`` with ``V = sqrt(d^2 + |z|^2)``

(Carleman representation of the gain term).  ``d * G`` is smooth and is
tabulated on a two-dimensional spline.

Rows of ``K`` are assembled with a polar quadrature centred at each node so
that the ``1/d`` singularity is absorbed by the Jacobian; the integrand is
evaluated against the interpolation basis of the grid.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.interpolate import RectBivariateSpline
from scipy.special import erf, i0e

from . import cache as _cache
from .grid import (ConfigError, GridFunction, discrete_orthonormal, inner, japanese,
                   lagrange_matrix)
from .maxwell import A, MaxwellianParams, eval_maxwellian, sqrt_ratio

CODE_VERSION = "k2"

CROSS_SECTIONS = {
    "cos": lambda c: np.abs(c),
    "cos2": lambda c: np.asarray(c) ** 2,
    "cos_smooth": lambda c: np.abs(c) * (1.0 + np.asarray(c) ** 2) / 2.0,
}


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class Quadrature:
    """Resolution of the per-row polar quadrature used to assemble ``K``."""

    n_rho: int = 40
    n_theta: int = 32
    n_phi: int = 48
    rho_cut: float = 14.0


@dataclass(frozen=True)
class CollisionModel:
    gamma: float = 0.0
    cross_section: str = "cos"
    background: MaxwellianParams = A
    quadrature: Quadrature = field(default_factory=Quadrature)

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if self.cross_section not in CROSS_SECTIONS:
            raise ConfigError(f"unknown cross section {self.cross_section!r}")
        c = np.linspace(0.0, 1.0, 201)
        B = CROSS_SECTIONS[self.cross_section](c)
        if np.any(B[1:] <= 0) or np.any(B > c + 1e-14):
            raise ConfigError("cross section violates 0 < B(c) <= |c|")

    def B(self, c):
        return CROSS_SECTIONS[self.cross_section](c)

    def with_background(self, b):
        return CollisionModel(self.gamma, self.cross_section, b, self.quadrature)

    def key(self):
        b = self.background
        return {"gamma": self.gamma, "B": self.cross_section, "rho": b.rho,
                "mu": list(b.mu), "lam": b.lam,
                "quad": [self.quadrature.n_rho, self.quadrature.n_theta,
                         self.quadrature.n_phi, self.quadrature.rho_cut]}


@dataclass
class OperatorMatrix:
    entries: np.ndarray
    sector: int
    kind: str
    info: dict = field(default_factory=dict)

    def __matmul__(self, f):
        return GridFunction(f.grid, self.entries @ f.values, f.sector)


# --------------------------------------------------------------------------
# scalar ingredients
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def angular_mean(name):
    """``Bbar = int_0^1 B(c) dc``."""
    return quad(lambda c: float(CROSS_SECTIONS[name](c)), 0.0, 1.0, epsabs=1e-15)[0]


def unit_collision_frequency(s, gamma, n=96):
    """``int |s e - X|^gamma M_std(X) dX`` as a function of ``s >= 0``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if gamma == 0.0:
        return np.ones_like(s)
    if gamma == 1.0:
        out = np.empty_like(s)
        small = s < 1e-6
        ss = np.where(small, 1.0, s)
        out[:] = np.sqrt(2 / np.pi) * np.exp(-ss ** 2 / 2) + (ss + 1 / ss) * erf(ss / np.sqrt(2))
        out[small] = 2.0 * np.sqrt(2.0 / np.pi)
        return out
    x, w = leggauss(n)
    out = np.empty_like(s)
    for k, sv in enumerate(s):
        hi = sv + 12.0
        r = 0.5 * hi * (x + 1)
        wr = 0.5 * hi * w
        if sv < 1e-8:
            f = 4 * np.pi * r ** (2 + gamma) * (2 * np.pi) ** -1.5 * np.exp(-r ** 2 / 2)
        else:
            # exp(-(s^2+r^2)/2) sinh(s r)/(s r), written without overflow
            f = (4 * np.pi * (2 * np.pi) ** -1.5 * r ** (2 + gamma)
                 * np.exp(-(r - sv) ** 2 / 2) * (-np.expm1(-2 * sv * r)) / (2 * sv * r))
        out[k] = np.sum(wr * f)
    return out


def nu_values(model, points):
    """Collision frequency of ``model.background`` at Cartesian points."""
    b = model.background
    d = np.linalg.norm(np.asarray(points) - b.mu_vec, axis=-1)
    return (4 * np.pi * angular_mean(model.cross_section) * b.rho * b.lam ** (model.gamma / 2)
            * unit_collision_frequency(d / np.sqrt(b.lam), model.gamma))


def _gain_table_direct(d, a, gamma, Bfun, n=40):
    """``d * G(d, a)`` by radial quadrature in the plane (scalar reference)."""
    x, w = leggauss(n)
    dd = max(d, 1e-9)
    brk = sorted({0.0, min(4 * dd, 1.0), max(a - 10, 0.0), a, a + 10.0})
    tot = 0.0
    for lo, hi in zip(brk[:-1], brk[1:]):
        if hi - lo < 1e-14:
            continue
        z = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        wz = 0.5 * (hi - lo) * w
        tot += np.sum(wz * _gain_integrand(z, dd, a, gamma, Bfun))
    return tot


def _gain_integrand(z, d, a, gamma, Bfun):
    V = np.sqrt(d * d + z * z)
    br = 2 * Bfun(d / V) / d + 2 * Bfun(z / V) / z
    return 2 * np.pi * z * br * V ** gamma * np.exp(-(z - a) ** 2 / 2) * i0e(z * a)


def _gain_table_rows(d_values, a_values, gamma, Bfun, z_max):
    """Vectorized ``d * G`` on a tensor grid (composite Gauss rule in z)."""
    x, w = leggauss(12)
    out = np.empty((len(d_values), len(a_values)))
    A = np.asarray(a_values)[None, :]
    for k, d in enumerate(d_values):
        dd = max(d, 1e-9)
        first = min(4 * dd, 1.0)
        edges = np.concatenate([[0.0, first / 4, first / 2, first],
                                np.arange(first + 0.5, z_max + 0.5, 0.5)])
        lo, hi = edges[:-1], edges[1:]
        z = (0.5 * (hi - lo)[:, None] * x + 0.5 * (hi + lo)[:, None]).ravel()
        wz = (0.5 * (hi - lo)[:, None] * w).ravel()
        f = _gain_integrand(z[:, None], dd, A, gamma, Bfun)
        out[k] = wz @ f
    return out


class GainTable:
    """Spline of ``H(d, a) = d G(d, a)`` (closed form for hard spheres)."""

    D_MAX = 26.0
    A_MAX = 44.0

    def __init__(self, gamma, name):
        self.gamma = gamma
        self.name = name
        self.constant = None
        if name == "cos" and gamma == 1.0:
            self.constant = 8.0 * np.pi
            return
        Bfun = CROSS_SECTIONS[name]
        d = np.concatenate([np.linspace(0, 2, 41), np.linspace(2.1, 6, 40),
                            np.linspace(6.25, self.D_MAX, 72)])
        a = np.concatenate([np.linspace(0, 12, 97), np.linspace(12.25, self.A_MAX, 128)])
        key = f"gain-{name}-{gamma!r}-{CODE_VERSION}"
        stored = _cache.load(key)
        if stored is not None and stored["H"].shape == (d.size, a.size):
            H = stored["H"]
        else:
            H = _gain_table_rows(d, a, gamma, Bfun, self.A_MAX + 14.0)
            _cache.save(key, {"H": H}, {"table": key})
        self.spline = RectBivariateSpline(d, a, H, kx=3, ky=3)

    def __call__(self, d, a):
        if self.constant is not None:
            return np.full(np.broadcast(d, a).shape, self.constant)
        d = np.clip(d, 0.0, self.D_MAX)
        a = np.clip(a, 0.0, self.A_MAX)
        return self.spline.ev(d, a)


@lru_cache(maxsize=None)
def gain_table(gamma, name):
    return GainTable(gamma, name)


def kernel_k2(model, xi, eta):
    """Gain kernel ``k_2(xi, eta)`` for the model background."""
    b = model.background
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    p = xi - eta
    d = np.linalg.norm(p, axis=-1)
    m = 0.5 * (xi + eta) - b.mu_vec
    with np.errstate(invalid="ignore", divide="ignore"):
        ph = p / d[..., None]
    mpar = np.sum(m * ph, axis=-1)
    a = np.linalg.norm(m - mpar[..., None] * ph, axis=-1)
    sl = np.sqrt(b.lam)
    H = gain_table(model.gamma, model.cross_section)(d / sl, a / sl)
    pref = b.rho * (2 * np.pi * b.lam) ** -1.5 * b.lam ** (model.gamma / 2)
    return pref * np.exp(-d * d / (8 * b.lam) - mpar ** 2 / (2 * b.lam)) * H * sl / d


def kernel_k1(model, xi, eta):
    b = model.background
    d = np.linalg.norm(np.asarray(xi) - np.asarray(eta), axis=-1)
    return (4 * np.pi * angular_mean(model.cross_section) * d ** model.gamma
            * np.sqrt(eval_maxwellian(b, xi) * eval_maxwellian(b, eta)))


# --------------------------------------------------------------------------
# polar quadrature about a node
# --------------------------------------------------------------------------

def _row_quadrature(model, grid, xi):
    """Points ``eta`` and weights times ``k(xi, eta)`` for one row."""
    q = model.quadrature
    b = model.background
    sl = np.sqrt(b.lam)
    s_i = np.linalg.norm(xi - np.array([0, 0, grid.center]))
    rho_max = min(s_i + grid.s_max, q.rho_cut * sl)
    xr, wr = leggauss(q.n_rho)
    rho = 0.5 * rho_max * (xr + 1)
    w_rho = 0.5 * rho_max * wr
    ct, wt = leggauss(q.n_theta)
    ph = 2 * np.pi * np.arange(q.n_phi) / q.n_phi
    wp = 2 * np.pi / q.n_phi
    st = np.sqrt(1 - ct ** 2)
    # local frame with polar axis pointing to the grid center
    rel = xi - np.array([0, 0, grid.center])
    e3 = -rel / max(np.linalg.norm(rel), 1e-300)
    tmp = np.array([1.0, 0, 0]) if abs(e3[0]) < 0.9 else np.array([0, 1.0, 0])
    e1 = tmp - (tmp @ e3) * e3
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    dirs = (st[:, None, None] * np.cos(ph)[None, :, None] * e1
            + st[:, None, None] * np.sin(ph)[None, :, None] * e2
            + ct[:, None, None] * e3).reshape(-1, 3)
    wdir = np.repeat(wt, q.n_phi) * wp
    # kernel in polar form: d = rho, p_hat = -e, m = xi - mu + rho e / 2
    xm = xi - b.mu_vec
    proj = dirs @ xm
    a = np.sqrt(np.clip(xm @ xm - proj ** 2, 0.0, None))
    mpar = -proj[None, :] - 0.5 * rho[:, None]
    H = gain_table(model.gamma, model.cross_section)(
        np.repeat(rho / sl, dirs.shape[0]), np.tile(a / sl, rho.size)).reshape(rho.size, -1)
    pref = b.rho * (2 * np.pi * b.lam) ** -1.5 * b.lam ** (model.gamma / 2)
    # rho^2 k_2 = rho * sqrt(lam) * pref * exp(..) * H
    k2r2 = (pref * sl * rho[:, None] * H
            * np.exp(-rho[:, None] ** 2 / (8 * b.lam) - mpar ** 2 / (2 * b.lam)))
    eta = xi[None, None, :] + rho[:, None, None] * dirs[None, :, :]
    k1r2 = rho[:, None] ** 2 * kernel_k1(model, xi[None, None, :], eta)
    w = w_rho[:, None] * wdir[None, :]
    return eta.reshape(-1, 3), (w * k2r2).ravel(), (w * k1r2).ravel()


def _assemble_rows(model, grid, sectors):
    """Raw matrices ``K`` (one per sector) from the polar quadrature."""
    N = grid.size
    out = {m: np.zeros((N, N)) for m in sectors}
    nodes = grid.cartesian()
    ns = {m: grid.node_scale(m) for m in sectors}
    for i in range(N):
        eta, wk2, wk1 = _row_quadrature(model, grid, nodes[i])
        wk = wk2 - wk1
        s, c, phi = grid.local_coords(eta)
        inside = s <= grid.s_max
        Es = lagrange_matrix(grid.speed_nodes, grid._bw_s, np.minimum(s, grid.s_max))
        Ec = lagrange_matrix(grid.cosine_nodes, grid._bw_c, c)
        base = np.where(inside, wk * grid.envelope(s), 0.0)
        sin2 = np.clip(1 - c * c, 0.0, None)
        for m in sectors:
            fac = base * np.cos(m * phi) * sin2 ** (0.5 * m)
            row = (Es * fac[:, None]).T @ Ec
            out[m][i] = (row / ns[m]).ravel()
    return out


# --------------------------------------------------------------------------
# invariants and projections
# --------------------------------------------------------------------------

def background_invariants(grid, m, b=A):
    """Discrete orthonormal collision invariants of background ``b``."""
    if not b.is_axial():
        raise ConfigError("sector-reduced operators need the bulk velocity on the axis")
    xi = grid.cartesian()
    sm = np.sqrt(eval_maxwellian(b, xi))
    d = xi - b.mu_vec
    funcs = []
    if m == 0:
        funcs = [sm, d[:, 2] * sm, np.sum(d * d, axis=-1) * sm]
    elif m == 1:
        funcs = [d[:, 0] * sm]
    return discrete_orthonormal([GridFunction(grid, f, m) for f in funcs])


def projector_P0(grid, m, b=A):
    """Matrix of the orthogonal projection onto the invariants in sector m."""
    basis = background_invariants(grid, m, b)
    N = grid.size
    P = np.zeros((N, N))
    W = grid.weights * grid.azimuthal_factor(m)
    for e in basis:
        P += np.outer(e.values, e.values * W)
    return P


def project_P0(g, b=A):
    P = projector_P0(g.grid, g.sector, b)
    return GridFunction(g.grid, P @ g.values, g.sector)


def project_P1(g, b=A):
    return g - project_P0(g, b)


def w_adjoint(grid, M):
    W = grid.weights
    return (M.T * W[None, :]) / W[:, None]


# --------------------------------------------------------------------------
# assembly front end
# --------------------------------------------------------------------------

def _cache_key(model, grid, sectors):
    payload = {"model": model.key(), "grid": list(grid.key()), "sectors": sorted(sectors),
               "version": CODE_VERSION}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:24], payload


def assemble_operators(model, grid, sectors=(0, 1), use_cache=True):
    """Assemble ``nu``, ``K`` and ``L`` for several sectors at once.

    Returns a dict keyed by sector with :class:`OperatorMatrix` entries
    under ``"nu"``, ``"K"`` and ``"L"``.  The raw quadrature matrix is
    symmetrized in the grid inner product and restricted to the orthogonal
    complement of the discrete invariants (``L = P1 L P1``); the size of
    both corrections is kept in ``info``.
    """
    sectors = tuple(sorted(set(int(m) for m in sectors)))
    key, payload = _cache_key(model, grid, sectors)
    raw = _cache.load(key) if use_cache else None
    if raw is None:
        Kraw = _assemble_rows(model, grid, sectors)
        raw = {f"K{m}": Kraw[m] for m in sectors}
        if use_cache:
            _cache.save(key, raw, payload)
    nu = nu_values(model, grid.cartesian())
    out = {}
    for m in sectors:
        K = raw[f"K{m}"]
        Lraw = K - np.diag(nu)
        nrm = np.linalg.norm(Lraw, 2)
        asym = np.linalg.norm(Lraw - w_adjoint(grid, Lraw)) / np.linalg.norm(Lraw)
        Ls = 0.5 * (Lraw + w_adjoint(grid, Lraw))
        inv = background_invariants(grid, m, model.background)
        defect = max([np.linalg.norm(Ls @ e.values) / nrm for e in inv], default=0.0)
        P1 = np.eye(grid.size) - projector_P0(grid, m, model.background)
        Lc = P1 @ Ls @ P1
        Lc = 0.5 * (Lc + w_adjoint(grid, Lc))
        info = {"raw_asymmetry": float(asym), "raw_invariant_defect": float(defect),
                "norm": float(nrm)}
        out[m] = {"nu": OperatorMatrix(np.diag(nu), m, "Nu"),
                  "K": OperatorMatrix(Lc + np.diag(nu), m, "K", info),
                  "L": OperatorMatrix(Lc, m, "L", info)}
    return out


def compute_nu(model, grid):
    return OperatorMatrix(np.diag(nu_values(model, grid.cartesian())), grid.sector, "Nu")


def assemble_K(model, grid, sector=None, use_cache=True):
    m = grid.sector if sector is None else sector
    return assemble_operators(model, grid, (m,), use_cache)[m]["K"]


def assemble_L(model, grid, sector=None, use_cache=True):
    m = grid.sector if sector is None else sector
    return assemble_operators(model, grid, (m,), use_cache)[m]["L"]


def export_text(op, path):
    """Plain-text matrix dump for cross-implementation diffing."""
    np.savetxt(path, op.entries, fmt="%.16e",
               header=f"kind={op.kind} sector={op.sector} shape={op.entries.shape}")


# --------------------------------------------------------------------------
# diagnostics for the kernel estimates
# --------------------------------------------------------------------------

def kernel_weighted_sup(model, grid, out_weight, in_weight):
    """``max_i out_weight(xi_i) int |k(xi_i, eta)| / in_weight(eta) d eta``.

    Evaluated with the same polar quadrature that assembles ``K`` but on the
    absolute kernel, so it measures the operator norm on weighted ``L^inf``.
    """
    nodes = grid.cartesian()
    best = 0.0
    for i in range(grid.size):
        eta, wk2, wk1 = _row_quadrature(model, grid, nodes[i])
        val = out_weight(nodes[i][None])[0] * np.sum(np.abs(wk2 - wk1) / in_weight(eta))
        best = max(best, float(val))
    return best


def kernel_envelope_profile(grid, K, n_bins=12):
    """Running maximum of ``|K_ij| / W_j`` binned by ``|xi|^2 + |eta|^2``."""
    s = grid.s
    r2 = s[:, None] ** 2 + s[None, :] ** 2
    val = np.abs(K) / grid.weights[None, :]
    edges = np.linspace(0, r2.max() + 1e-9, n_bins + 1)
    prof = np.array([val[(r2 >= lo) & (r2 < hi)].max() if np.any((r2 >= lo) & (r2 < hi)) else 0.0
                     for lo, hi in zip(edges[:-1], edges[1:])])
    env = np.maximum.accumulate(prof[::-1])[::-1]
    return 0.5 * (edges[:-1] + edges[1:]), prof, env


# --------------------------------------------------------------------------
# bilinear collision term
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaQuadrature:
    n_u: int = 16
    u_max: float = 12.0
    n_dir_theta: int = 12
    n_dir_phi: int = 24
    n_w: int = 16
    w_max: float = 12.0
    n_psi: int = 16


def _sphere_rule(nt, npf):
    ct, wt = leggauss(nt)
    ph = 2 * np.pi * np.arange(npf) / npf
    st = np.sqrt(1 - ct ** 2)
    dirs = np.stack([np.outer(st, np.cos(ph)), np.outer(st, np.sin(ph)),
                     np.outer(ct, np.ones(npf))], axis=-1).reshape(-1, 3)
    return dirs, np.repeat(wt, npf) * (2 * np.pi / npf)


def _point_values(grid, h, pts, envelope):
    Es, Ec, scale = grid.interpolation_factors(pts, h.sector, envelope)
    coef = h.values.reshape(grid.shape) / grid.node_scale(h.sector, envelope)
    return scale * np.einsum("pa,ab,pb->p", Es, coef, Ec, optimize=True)


def gamma_bilinear(model, grid, h1, h2, quad_spec=GammaQuadrature(), envelope=True,
                   conservative=True):
    """``Gamma(h1, h2) = Q(sqrt(M) h1, sqrt(M) h2) / sqrt(M)`` at the nodes.

    ``Q`` is the symmetrized bilinear collision operator around the standard
    Maxwellian ``M``.  The gain part uses the Carleman parametrization
    ``xi' = xi - u``, ``xi_*' = xi - w`` with ``w`` orthogonal to ``u``; the
    loss part is a polar integral about the node.  With ``conservative`` the
    result is projected onto the complement of the invariants and the size
    of the removed part is attached as ``gamma_bilinear.last_defect``.
    """
    if h2.sector != 0:
        if h1.sector != 0:
            raise ConfigError("only sector pairs (m, 0) and (0, m) are supported")
        h1, h2 = h2, h1
    if h1.grid.key() != h2.grid.key():
        raise ConfigError("grid mismatch")
    m = h1.sector
    q = quad_spec
    xu, wu = leggauss(q.n_u)
    u = 0.5 * q.u_max * (xu + 1)
    wu = 0.5 * q.u_max * wu
    xw, ww = leggauss(q.n_w)
    wr = 0.5 * q.w_max * (xw + 1)
    ww = 0.5 * q.w_max * ww
    psi = 2 * np.pi * np.arange(q.n_psi) / q.n_psi
    wpsi = 2 * np.pi / q.n_psi
    dirs, wdir = _sphere_rule(q.n_dir_theta, q.n_dir_phi)
    # orthonormal frames for the planes orthogonal to each u-direction
    e1 = np.cross(dirs, np.array([0.0, 0.0, 1.0]))
    bad = np.linalg.norm(e1, axis=1) < 1e-8
    e1[bad] = np.array([1.0, 0.0, 0.0])
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(dirs, e1)
    plane = (np.cos(psi)[:, None, None] * e1[None, :, :]
             + np.sin(psi)[:, None, None] * e2[None, :, :])  # psi x dir x 3
    wvec = wr[:, None, None, None] * plane[None]  # w x psi x dir x 3
    V = np.sqrt(u[:, None] ** 2 + wr[None, :] ** 2)
    Kuw = model.B(u[:, None] / V) * V ** model.gamma  # u x w
    bbar4 = 4 * np.pi * angular_mean(model.cross_section)
    nodes = grid.cartesian()
    out = np.zeros(grid.size, dtype=complex)
    for i in range(grid.size):
        xi = nodes[i]
        pu = xi[None, None, :] - u[:, None, None] * dirs[None, :, :]      # u x dir
        pw = xi[None, None, None, :] - wvec                                # w x psi x dir
        smu = np.exp(-np.sum(pu * pu, -1) / 4) * (2 * np.pi) ** -0.75
        smw = np.exp(-np.sum(pw * pw, -1) / 4) * (2 * np.pi) ** -0.75
        F_u = _point_values(grid, h1, pu.reshape(-1, 3), envelope).reshape(pu.shape[:2]) * smu
        G_u = _point_values(grid, h2, pu.reshape(-1, 3), envelope).reshape(pu.shape[:2]) * smu
        F_w = _point_values(grid, h1, pw.reshape(-1, 3), envelope).reshape(pw.shape[:3]) * smw
        G_w = _point_values(grid, h2, pw.reshape(-1, 3), envelope).reshape(pw.shape[:3]) * smw
        Fbar = np.einsum("wpd,w->wd", F_w, wr * ww) * wpsi
        Gbar = np.einsum("wpd,w->wd", G_w, wr * ww) * wpsi
        gain = 2 * np.einsum("u,d,uw,ud,wd->", wu, wdir, Kuw, G_u, Fbar)
        gain += 2 * np.einsum("u,d,uw,ud,wd->", wu, wdir, Kuw, F_u, Gbar)
        lw = wu * u ** (2 + model.gamma)
        nuF = bbar4 * np.einsum("u,d,ud->", lw, wdir, F_u)
        nuG = bbar4 * np.einsum("u,d,ud->", lw, wdir, G_u)
        sm = np.exp(-xi @ xi / 4) * (2 * np.pi) ** -0.75
        Fi = _point_values(grid, h1, xi[None], envelope)[0] * sm
        Gi = _point_values(grid, h2, xi[None], envelope)[0] * sm
        out[i] = (gain - Fi * nuG - Gi * nuF) / (2 * sm)
    res = GridFunction(grid, out, m)
    if not np.iscomplexobj(h1.values) and not np.iscomplexobj(h2.values):
        res = GridFunction(grid, out.real, m)
    defect = 0.0
    if conservative:
        p0 = project_P0(res)
        nr = max(float(np.sqrt(abs(inner(res, res)))), 1e-300)
        defect = float(np.sqrt(abs(inner(p0, p0)))) / nr
        res = res - p0
    gamma_bilinear.last_defect = defect
    return res


gamma_bilinear.last_defect = 0.0


def maxwellian_difference(grid, b):
    """``(M_b - M_a) / sqrt(M_a)`` at the nodes (sector 0)."""
    xi = grid.cartesian()
    ma = eval_maxwellian(A, xi)
    return GridFunction(grid, (eval_maxwellian(b, xi) - ma) / np.sqrt(ma), 0)


def ratio_diag(grid, b):
    return sqrt_ratio(b, grid.cartesian(), strict=False)


def assemble_T(pair, grid, beta=None, sector=None, model=None, ops_a=None, ops_b=None,
               use_cache=True):
    """Frozen bilinear source ``T h = Gamma(R h, (M_b - M_a)/sqrt(M_a))``.

    Built from the exact identity ``2 T = R L_b - L_a R`` with ``R`` the
    multiplication by ``sqrt(M_b / M_a)``; ``beta`` is accepted for the
    weighted-norm bookkeeping of the caller and does not change the matrix.
    """
    m = grid.sector if sector is None else sector
    model = CollisionModel() if model is None else model
    b = pair.b
    if pair.identical:
        return OperatorMatrix(np.zeros((grid.size, grid.size)), m, "T")
    La = (ops_a or assemble_operators(model.with_background(A), grid, (m,), use_cache))[m]["L"].entries
    Lb = (ops_b or assemble_operators(model.with_background(b), grid, (m,), use_cache))[m]["L"].entries
    R = ratio_diag(grid, b)
    T = 0.5 * (R[:, None] * Lb - La * R[None, :])
    return OperatorMatrix(T, m, "T")
