"""Leading background-difference term driven by the frozen bilinear source.

``chi11(t) = 2 eps int_0^t G_a(t - tau) T G_b(tau) f0_b d tau`` where ``G_a``
and ``G_b`` are the linearized semigroups around the reference and the
perturbed Maxwellian, ``T h = Gamma(sqrt(M_b/M_a) h, (M_b - M_a)/sqrt(M_a))``
and ``f0_b = sqrt(M_a/M_b) f0_a``.  ``T`` acts only in velocity, so the
integral is diagonal in the wavevector ``eta``.

The bulk velocity of ``b`` fixes the axis ``e_3``.  For ``eta = r omega`` with
``omega = (sin theta, 0, cos theta)`` the transport term couples neighbouring
azimuthal sectors of the ``cos(m phi)`` family; sectors ``m <= M`` are kept.
Everything is axisymmetric about ``e_3``, so the dependence on the azimuth
of ``omega`` is a rotation, and x-space values follow from an expansion of
the mode data in associated Legendre functions of ``cos theta``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import factorial

import numpy as np
from scipy.special import lpmv, roots_legendre, spherical_jn

from .collision import (CollisionModel, OperatorMatrix, assemble_operators, assemble_T,
                        background_invariants, project_P0)
from .fitting import fit_decay, fit_exponential, geometric_times
from .grid import ConfigError, GridFunction, build_grid, chi_basis, japanese, lagrange_matrix
from .grid import barycentric_weights
from .maxwell import A, BackgroundPair, DomainError, MaxwellianParams, macro_error, sqrt_ratio
from .semigroup import SpaceProfile, smooth_cutoff, wavenumber_grid
from .spectrum import choose_delta, scaling_factor

CHI_PANELS = ((0.0, 0.4, 0.025, 8), (0.4, 1.2, 0.2, 6), (1.2, 4.0, 0.7, 4))
N_SLOW = 4  # fluid eigenvalues in the cos-family for an in-plane wavevector


class CrossCheckError(RuntimeError):
    pass


@dataclass(frozen=True)
class ChiConfig:
    b: MaxwellianParams = MaxwellianParams(1.001, 0.02, 1.001)
    beta: float = 4.0
    epsilon: float = 1.0
    gamma: float = 0.0
    cross_section: str = "cos"
    n_speed: int = 10
    n_cosine: int = 6
    s_max: float = 8.0
    max_sector: int = 3
    n_theta: int = 12
    profile: SpaceProfile = SpaceProfile()
    datum: str = "chi0"
    panels: tuple = CHI_PANELS
    t_max: float = 300.0
    per_decade: int = 12
    window: tuple = (20.0, 300.0)
    delta: float | None = None
    decomposition_time: float | None = 200.0
    strict: bool = True

    def __post_init__(self):
        if self.beta <= 1.5 + 2 * self.gamma:
            raise ConfigError("beta must exceed 3/2 + 2 gamma")
        if not self.b.is_axial():
            raise ConfigError("the bulk velocity must lie on the axis")

    @property
    def pair(self):
        return BackgroundPair(self.b)

    @property
    def model(self):
        return CollisionModel(self.gamma, self.cross_section)

    def grid(self):
        return build_grid(self.n_speed, self.n_cosine, self.s_max, 0)

    def times(self):
        t = [[0.0], geometric_times(1.0, self.t_max, self.per_decade)]
        if self.decomposition_time is not None:
            t.append([self.decomposition_time])
        return np.unique(np.round(np.concatenate(t), 12))


# --------------------------------------------------------------------------
# data and operators
# --------------------------------------------------------------------------

def initial_profile_a(grid, datum="chi0"):
    """Velocity profile of ``f0_a`` (sector 0)."""
    g = grid.with_sector(0)
    if datum == "chi0":
        return chi_basis(g, 0)["chi0"]
    if datum == "nonfluid":
        s = g.s
        f = GridFunction(g, (s ** 4 - 10 * s ** 2 + 15) / np.sqrt(120) * (2 * np.pi) ** -0.75
                         * np.exp(-s ** 2 / 4), 0)
        return f - project_P0(f)
    raise ConfigError(f"unknown datum {datum!r}")


def derive_f0b(pair, f0a):
    """``f0_b = sqrt(M_a / M_b) f0_a`` pointwise on the grid."""
    R = sqrt_ratio(pair.b, f0a.grid.cartesian(), strict=False)
    return GridFunction(f0a.grid, f0a.values / R, f0a.sector)


@dataclass
class SectorOperators:
    """Per-sector ``L_a``, ``L_b`` and ``T`` for sectors ``0..M``."""
    grid: object
    La: dict
    Lb: dict
    T: dict
    info: dict = field(default_factory=dict)


def assemble_Lb(pair, grid, sector, model=None, use_cache=True):
    """Linearized operator around ``M_b`` in one sector (direct quadrature)."""
    model = CollisionModel() if model is None else model
    return assemble_operators(model.with_background(pair.b), grid.with_sector(sector),
                              (sector,), use_cache)[sector]["L"]


def scaling_cross_check(pair, model, grid, tol=1e-5, use_cache=True, sectors=(0, 1)):
    """Spectrum of ``L_b`` on the similarity-adapted grid against the
    transformed spectrum of ``L_a``; raises when the mismatch exceeds ``tol``."""
    b = pair.b
    k = scaling_factor(b, model.gamma)
    gb = build_grid(grid.n_speed, grid.n_cosine, grid.s_max * np.sqrt(b.lam), 0,
                    temperature=b.lam, center=b.mu_axial)
    oa = assemble_operators(model.with_background(A), grid, sectors, use_cache)
    ob = assemble_operators(model.with_background(b), gb, sectors, use_cache)
    worst = 0.0
    for m in sectors:
        ea = np.sort(np.linalg.eigvals(oa[m]["L"].entries).real)
        eb = np.sort(np.linalg.eigvals(ob[m]["L"].entries).real)
        worst = max(worst, float(np.max(np.abs(eb - k * ea)) / np.max(np.abs(eb))))
    if worst > tol:
        raise CrossCheckError(f"background scaling mismatch {worst:.2e} > {tol:.0e}")
    return worst


def sector_operators(pair, model, grid, max_sector=3, use_cache=True):
    sectors = tuple(range(max_sector + 1))
    oa = assemble_operators(model.with_background(A), grid, sectors, use_cache)
    ob = assemble_operators(model.with_background(pair.b), grid, sectors, use_cache)
    La, Lb, T = {}, {}, {}
    for m in sectors:
        gm = grid.with_sector(m)
        La[m] = oa[m]["L"].entries
        Lb[m] = ob[m]["L"].entries
        T[m] = assemble_T(pair, gm, sector=m, model=model, ops_a=oa, ops_b=ob).entries
    return SectorOperators(grid, La, Lb, T)


def coupled_matrix(blocks, grid, r, theta, max_sector):
    """``-i r (omega . xi) + blockdiag(blocks)`` on sectors ``0..M``."""
    N = grid.size
    M = max_sector
    s, c = grid.s, grid.c
    xi3 = grid.center + s * c
    xi_perp = s * np.sqrt(1 - c * c)
    out = np.zeros(((M + 1) * N, (M + 1) * N), dtype=complex)
    ct, st = np.cos(theta), np.sin(theta)
    for m in range(M + 1):
        sl = slice(m * N, (m + 1) * N)
        out[sl, sl] = blocks[m] - 1j * r * ct * np.diag(xi3)
    # cos(phi) cos(m phi) = (cos((m-1) phi) + cos((m+1) phi)) / 2, cos(-phi) = cos(phi)
    for n in range(M + 1):
        for m in (n - 1, n + 1):
            if 0 <= m <= M:
                coef = 1.0 if (n == 1 and m == 0) else 0.5
                out[n * N:(n + 1) * N, m * N:(m + 1) * N] += -1j * r * st * coef * np.diag(xi_perp)
    return out


def block_diag(blocks, max_sector):
    N = blocks[0].shape[0]
    out = np.zeros(((max_sector + 1) * N,) * 2)
    for m in range(max_sector + 1):
        out[m * N:(m + 1) * N, m * N:(m + 1) * N] = blocks[m]
    return out


# --------------------------------------------------------------------------
# exact Duhamel integral in eigen-coordinates
# --------------------------------------------------------------------------

def _e1(z):
    """``(exp(z) - 1) / z`` with the removable singularity handled."""
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    big = np.abs(z) > 1e-5
    out[big] = np.expm1(z[big]) / z[big]
    zs = z[~big]
    out[~big] = 1 + zs / 2 + zs * zs / 6
    return out


def pair_integral(lam, mu, t, a, b):
    """``int_a^b exp(lam (t - tau) + mu tau) d tau`` for broadcastable arrays."""
    lam = np.asarray(lam, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    d = mu - lam
    h = b - a
    # both branches are evaluated; only the one selected below is well scaled
    with np.errstate(over="ignore", invalid="ignore"):
        left = np.exp(lam * (t - a) + mu * a) * h * _e1(d * h)
        right = np.exp(lam * (t - b) + mu * b) * h * _e1(-d * h)
    return np.where(d.real <= 0, left, right)


@dataclass
class DuhamelMode:
    """Eigen-data of one wavevector and the Duhamel solution operator."""
    lam: np.ndarray
    Va: np.ndarray
    mu: np.ndarray
    C: np.ndarray      # Va^{-1} (2 eps T) Vb
    c: np.ndarray      # Vb^{-1} psi_b
    slow_a: np.ndarray
    slow_b: np.ndarray

    def solve(self, times, resonance=1e-7):
        """Solution at all ``times``; near-resonant pairs use the pair formula."""
        lam, mu = self.lam, self.mu
        D = mu[None, :] - lam[:, None]
        res = np.abs(D) < resonance
        Dinv = np.where(res, 0.0, 1.0 / np.where(res, 1.0, D))
        G = self.C * Dinv
        X = self.Va @ G
        d = -(G @ self.c)
        Eb = np.exp(np.outer(mu, times))
        Ea = np.exp(np.outer(lam, times))
        out = X @ (self.c[:, None] * Eb) + self.Va @ (d[:, None] * Ea)
        if np.any(res):
            ii, jj = np.nonzero(res)
            for i, j in zip(ii, jj):
                w = np.array([pair_integral(lam[i], mu[j], t, 0.0, t) for t in times])
                out += np.outer(self.Va[:, i], self.C[i, j] * self.c[j] * w)
        out[:, np.asarray(times) == 0] = 0.0
        return out.T

    def part_series(self, times, outer, inner):
        """Contribution of selected eigen-indices over ``[0, t]`` for every time."""
        i = np.asarray(outer, dtype=int)
        j = np.asarray(inner, dtype=int)
        times = np.asarray(times, dtype=float)
        out = np.zeros((len(times), self.Va.shape[0]), dtype=complex)
        if len(i) == 0 or len(j) == 0:
            return out
        lam = self.lam[i][None, :, None]
        mu = self.mu[j][None, None, :]
        tt = times[:, None, None]
        w = pair_integral(lam, mu, tt, 0.0, tt)
        coef = np.einsum("ij,tij,j->ti", self.C[np.ix_(i, j)], w, self.c[j])
        return coef @ self.Va[:, i].T

    def part(self, t, outer, inner, interval):
        """Contribution of selected eigen-indices over a time interval."""
        i = np.asarray(outer, dtype=int)
        j = np.asarray(inner, dtype=int)
        if len(i) == 0 or len(j) == 0:
            return np.zeros(self.Va.shape[0], dtype=complex)
        w = pair_integral(self.lam[i][:, None], self.mu[j][None, :], t, interval[0], interval[1])
        coef = (self.C[np.ix_(i, j)] * w) @ self.c[j]
        return self.Va[:, i] @ coef


def duhamel_mode(Aa, Ab, T2, psi):
    lam, Va = np.linalg.eig(Aa)
    mu, Vb = np.linalg.eig(Ab)
    C = np.linalg.solve(Va, T2 @ Vb)
    c = np.linalg.solve(Vb, psi)
    slow_a = np.argsort(np.abs(lam.real), kind="stable")[:N_SLOW]
    slow_b = np.argsort(np.abs(mu.real), kind="stable")[:N_SLOW]
    return DuhamelMode(lam, Va, mu, C, c, slow_a, slow_b)


# --------------------------------------------------------------------------
# associated Legendre expansion in cos(theta)
# --------------------------------------------------------------------------

def legendre_projection(nodes, m, n_l):
    """Matrix mapping nodal values ``g(c_k)`` (of the form ``(1-c^2)^{m/2} poly``)
    to coefficients ``a_l`` in ``g = sum_l a_l P_l^m(c)``, ``l = m .. m+n_l-1``."""
    n = len(nodes)
    cf, wf = roots_legendre(n + m + 2)
    Lg = lagrange_matrix(nodes, barycentric_weights(nodes), cf)
    h_scale = (1 - nodes ** 2) ** (-m / 2)
    Q = np.zeros((n_l, n))
    for k in range(n_l):
        l = m + k
        norm = (2 * l + 1) / 2 * factorial(l - m) / factorial(l + m)
        P = lpmv(m, l, cf) * (1 - cf ** 2) ** (m / 2) * wf
        Q[k] = norm * (P @ Lg) * h_scale
    return Q


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

@dataclass
class ChiSweep:
    config: ChiConfig
    grid: object
    r: np.ndarray
    r_weights: np.ndarray
    times: np.ndarray
    delta: float
    coef: np.ndarray            # (n_r, n_t, M+1, n_l, N) associated Legendre data
    l2x: np.ndarray             # (n_t, N) squared L2_x norm per velocity node
    parts: dict = field(default_factory=dict)  # name -> (n_r, M+1, n_l, N) at t_d
    parts_l2x: dict = field(default_factory=dict)
    mode_samples: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)      # name -> like ``coef``
    series_l2x: dict = field(default_factory=dict)

    @property
    def M(self):
        return self.config.max_sector

    def _synth(self, coef_t, radii, cos_x, phis):
        """``u(x, xi)`` for ``x = |x| (sin, 0, cos)`` and ``xi = (s, c, phi)``."""
        prof = self.config.profile
        w = self.r_weights * self.r ** 2 * prof.fourier(self.r) / (2 * np.pi ** 2)
        n_l = coef_t.shape[2]
        N = self.grid.size
        rx = np.outer(radii, self.r)
        um = np.zeros((self.M + 1, len(radii), len(cos_x), N), dtype=complex)
        for m in range(self.M + 1):
            for k in range(n_l):
                l = m + k
                J = spherical_jn(l, rx) * w[None, :]
                I = J @ coef_t[:, m, k, :]
                um[m] += (1j ** l) * I[:, None, :] * lpmv(m, l, cos_x)[None, :, None]
        cosm = np.cos(np.outer(np.arange(self.M + 1), phis))
        return np.einsum("mp,mxcn->xcpn", cosm, um)

    def linf(self, coef_t, t, beta, n_x=160, n_cx=13, n_phi=12, refine=True):
        """``max_{x, xi} <xi>^beta |u|`` with its location (coarse scan then refinement)."""
        wt = japanese(self.grid.s) ** beta
        X = 1.3 * np.sqrt(5 / 3) * t + 8 * np.sqrt(1 + t) + 6 * self.config.profile.width
        radii = np.linspace(0.0, X, n_x)
        cos_x = np.linspace(-1.0, 1.0, n_cx)
        phis = np.linspace(0.0, np.pi, n_phi)
        u = np.abs(self._synth(coef_t, radii, cos_x, phis)) * wt
        idx = np.unravel_index(int(np.argmax(u)), u.shape)
        best = float(u[idx])
        loc = (radii[idx[0]], cos_x[idx[1]], phis[idx[2]])
        if refine:
            h = radii[1] - radii[0]
            r2 = np.clip(np.linspace(loc[0] - 2 * h, loc[0] + 2 * h, 21), 0.0, None)
            c2 = np.clip(np.linspace(loc[1] - 0.2, loc[1] + 0.2, 9), -1.0, 1.0)
            p2 = np.linspace(loc[2] - 0.3, loc[2] + 0.3, 9)
            u2 = np.abs(self._synth(coef_t, r2, c2, p2)) * wt
            j = np.unravel_index(int(np.argmax(u2)), u2.shape)
            if u2[j] > best:
                best = float(u2[j])
                loc = (r2[j[0]], c2[j[1]], p2[j[2]])
        return best, loc

    def linf_l2(self, l2x, beta):
        """``max_xi <xi>^beta |u(., xi)|_{L^2_x}``."""
        wt = japanese(self.grid.s) ** beta
        return float(np.max(wt * np.sqrt(np.maximum(l2x, 0.0))))

    def norms(self, beta=None, indices=None, piece=None):
        """Both weighted norms at every stored time (``piece`` selects a stored series)."""
        beta = self.config.beta if beta is None else beta
        coef = self.coef if piece is None else self.series[piece]
        l2x = self.l2x if piece is None else self.series_l2x[piece]
        ks = range(len(self.times)) if indices is None else indices
        linf = np.zeros(len(self.times))
        l2 = np.zeros(len(self.times))
        where = np.zeros((len(self.times), 3))
        for k in ks:
            t = self.times[k]
            l2[k] = self.linf_l2(l2x[k], beta)
            if t == 0:
                continue
            linf[k], where[k] = self.linf(coef[:, k], t, beta)
        return {"t": self.times, "Linf": linf, "L2": l2, "argmax": where}


def _direction_rule(n_theta):
    ct, wt = roots_legendre(n_theta)
    return np.arccos(ct), ct, wt


def _l2x_weights(grid, M):
    """Azimuthal factors of the sectors (2 pi for m = 0, pi otherwise)."""
    return np.array([2 * np.pi] + [np.pi] * M)


def run_sweep(config=None, use_cache=True, ops=None, decomposition=True, sample_modes=(),
              series=()):
    """Evolve ``chi11`` for every wavevector of the (r, theta) grid.

    ``series`` names (outer x inner) pieces such as ``"LFxLF"`` whose time
    series over ``[0, t]`` are stored alongside the total.
    """
    config = ChiConfig() if config is None else config
    if config.strict:
        config.b.check_admissible()
    grid = config.grid()
    M = config.max_sector
    N = grid.size
    model = config.model
    pair = config.pair
    if ops is None:
        ops = sector_operators(pair, model, grid, M, use_cache)
    delta = config.delta
    if delta is None:
        o = assemble_operators(model.with_background(A), grid, (0, 1), use_cache)
        delta, _ = choose_delta({m: o[m]["L"] for m in (0, 1)}, grid)
    times = config.times()
    r, wr = wavenumber_grid(config.panels)
    thetas, cts, wts = _direction_rule(config.n_theta)
    n_l = config.n_theta
    Qm = [legendre_projection(cts, m, n_l) for m in range(M + 1)]
    La = block_diag(ops.La, M)
    Lb = block_diag(ops.Lb, M)
    T2 = 2 * config.epsilon * block_diag(ops.T, M)
    f0a = initial_profile_a(grid, config.datum)
    f0b = derive_f0b(pair, f0a)
    psi = np.zeros((M + 1) * N, dtype=complex)
    psi[:N] = f0b.values
    az = _l2x_weights(grid, M)
    W = grid.weights
    prof = config.profile
    coef = np.zeros((len(r), len(times), M + 1, n_l, N), dtype=complex)
    l2x = np.zeros((len(times), N))
    td = config.decomposition_time
    do_parts = decomposition and td is not None
    part_names = []
    if do_parts:
        for o in ("LF", "LN", "S"):
            for i in ("LF", "LN", "S"):
                for h in ("early", "late"):
                    part_names.append(f"{o}x{i}:{h}")
    parts = {p: np.zeros((len(r), M + 1, n_l, N), dtype=complex) for p in part_names}
    parts_l2x = {p: np.zeros(N) for p in part_names}
    ser = {p: np.zeros_like(coef) for p in series}
    ser_l2x = {p: np.zeros_like(l2x) for p in series}
    samples = {}
    for ir, rv in enumerate(r):
        chi = float(smooth_cutoff(rv, delta))
        vals = np.zeros((config.n_theta, len(times), (M + 1) * N), dtype=complex)
        pvals = {p: np.zeros((config.n_theta, (M + 1) * N), dtype=complex) for p in part_names}
        svals = {p: np.zeros_like(vals) for p in series}
        for k, th in enumerate(thetas):
            Aa = coupled_matrix(ops.La, grid, rv, th, M)
            Ab = coupled_matrix(ops.Lb, grid, rv, th, M)
            dm = duhamel_mode(Aa, Ab, T2, psi)
            vals[k] = dm.solve(times)
            if (ir, k) in sample_modes:
                samples[(ir, k)] = dm
            if do_parts or series:
                all_a = np.arange(len(dm.lam))
                rest_a = np.setdiff1d(all_a, dm.slow_a)
                rest_b = np.setdiff1d(all_a, dm.slow_b)
                sets_a = {"LF": (dm.slow_a, chi), "LN": (rest_a, chi), "S": (all_a, 1 - chi)}
                sets_b = {"LF": (dm.slow_b, chi), "LN": (rest_b, chi), "S": (all_a, 1 - chi)}
                for p in series:
                    o, i = p.split("x")
                    (ia, wa), (ib, wb) = sets_a[o], sets_b[i]
                    if wa * wb != 0:
                        svals[p][k] = wa * wb * dm.part_series(times, ia, ib)
                for p in part_names:
                    o, rest = p.split("x")
                    i, h = rest.split(":")
                    iv = (0.0, td / 2) if h == "early" else (td / 2, td)
                    (ia, wa), (ib, wb) = sets_a[o], sets_b[i]
                    if wa * wb == 0:
                        continue
                    pvals[p][k] = wa * wb * dm.part(td, ia, ib, iv)
        # L2_x accumulation: (2 pi)^{-3} r^2 |phi_hat|^2 sum_theta w_theta sum_m A_m |g_m|^2
        fac = wr[ir] * rv ** 2 * prof.fourier(rv) ** 2 / (2 * np.pi) ** 3
        v4 = vals.reshape(config.n_theta, len(times), M + 1, N)
        l2x += fac * np.einsum("k,m,ktmn->tn", wts, az, np.abs(v4) ** 2)
        for m in range(M + 1):
            coef[ir, :, m] = np.einsum("lk,ktn->tln", Qm[m], v4[:, :, m, :])
        for p in series:
            s4 = svals[p].reshape(config.n_theta, len(times), M + 1, N)
            ser_l2x[p] += fac * np.einsum("k,m,ktmn->tn", wts, az, np.abs(s4) ** 2)
            for m in range(M + 1):
                ser[p][ir, :, m] = np.einsum("lk,ktn->tln", Qm[m], s4[:, :, m, :])
        for p in part_names:
            pv = pvals[p].reshape(config.n_theta, M + 1, N)
            parts_l2x[p] += fac * np.einsum("k,m,kmn->n", wts, az, np.abs(pv) ** 2)
            for m in range(M + 1):
                parts[p][ir, m] = Qm[m] @ pv[:, m, :]
    return ChiSweep(config, grid, r, wr, times, delta, coef, l2x, parts, parts_l2x, samples,
                    ser, ser_l2x)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

def detect_peak_time(t, y):
    return float(t[int(np.argmax(y))])


def chi11_norms(config=None, use_cache=True, sweep=None):
    """Time series of the two weighted norms, fits and the normalized series."""
    config = ChiConfig() if config is None else config
    sweep = run_sweep(config, use_cache, decomposition=False) if sweep is None else sweep
    n = sweep.norms()
    B = macro_error(config.b)
    t = n["t"]
    t_peak = max(detect_peak_time(t, n["Linf"]), detect_peak_time(t, n["L2"]))
    lo = max(config.window[0], t_peak)
    hi = config.window[1]
    out = {"t": t, "Linf": n["Linf"], "L2": n["L2"], "argmax": n["argmax"],
           "B": B, "Linf_over_B": n["Linf"] / B, "L2_over_B": n["L2"] / B,
           "peak_time": t_peak, "window": (lo, hi)}
    if hi / lo >= 10 ** 0.5:
        out["fit_Linf"] = fit_decay(t, n["Linf"], (lo, hi), min_decades=0.5)
        out["fit_L2"] = fit_decay(t, n["L2"], (lo, hi), min_decades=0.5)
    return out


def chi11_mode(config, r, theta, times, use_cache=True, ops=None):
    """``chi11`` for a single wavevector ``r (sin theta, 0, cos theta)``."""
    grid = config.grid()
    M = config.max_sector
    ops = sector_operators(config.pair, config.model, grid, M, use_cache) if ops is None else ops
    N = grid.size
    f0b = derive_f0b(config.pair, initial_profile_a(grid, config.datum))
    psi = np.zeros((M + 1) * N, dtype=complex)
    psi[:N] = f0b.values
    dm = duhamel_mode(coupled_matrix(ops.La, grid, r, theta, M),
                      coupled_matrix(ops.Lb, grid, r, theta, M),
                      2 * config.epsilon * block_diag(ops.T, M), psi)
    return dm.solve(np.asarray(times, dtype=float))


def exchange_defect(config, r_values=(0.05, 0.2), theta=0.7, times=(5.0, 50.0), use_cache=True):
    """Relative size of ``chi11 + chi11(a <-> b)`` at a few wavevectors.

    With the roles of the backgrounds exchanged the source becomes
    ``(R^-1 L_a - L_b R^-1)/2`` and the data ``f0_a``; to first order in the
    discrepancy the result is the negative of ``chi11``.
    """
    grid = config.grid()
    M = config.max_sector
    ops = sector_operators(config.pair, config.model, grid, M, use_cache)
    N = grid.size
    Rinv = 1.0 / sqrt_ratio(config.b, grid.cartesian(), strict=False)
    Ts = {m: 0.5 * (Rinv[:, None] * ops.La[m] - ops.Lb[m] * Rinv[None, :]) for m in ops.La}
    f0a = initial_profile_a(grid, config.datum)
    f0b = derive_f0b(config.pair, f0a)
    pa = np.zeros((M + 1) * N, dtype=complex)
    pb = pa.copy()
    pa[:N] = f0a.values
    pb[:N] = f0b.values
    worst = 0.0
    for r in r_values:
        Aa = coupled_matrix(ops.La, grid, r, theta, M)
        Ab = coupled_matrix(ops.Lb, grid, r, theta, M)
        v = duhamel_mode(Aa, Ab, 2 * block_diag(ops.T, M), pb).solve(np.asarray(times))
        w = duhamel_mode(Ab, Aa, 2 * block_diag(Ts, M), pa).solve(np.asarray(times))
        worst = max(worst, float(np.max(np.linalg.norm(v + w, axis=1)
                                        / np.linalg.norm(v, axis=1))))
    return worst


def b_linearity_scan(config=None, scales=(1.0, 0.5, 0.25), use_cache=True, which="all",
                     unit_sweep=None):
    """Norms of ``chi11`` with ``(rho - 1, mu, lam - 1)`` multiplied by each scale.

    ``which`` selects the scaled components: ``all``, ``mu`` or ``lam``.
    ``unit_sweep`` is an already computed sweep of ``config`` that is reused
    for the unit scale when ``which`` is ``all``.
    """
    config = ChiConfig() if config is None else config
    base = config.b
    if which == "mu":
        base = MaxwellianParams(1.0, base.mu, 1.0)
    elif which == "lam":
        base = MaxwellianParams(1.0, 0.0, base.lam)
    rows = []
    ref = None
    for s in scales:
        cfg = replace(config, b=base.scaled(s), strict=False)
        if s == 0:
            rows.append({"scale": 0.0, "Linf": 0.0, "L2": 0.0})
            continue
        if unit_sweep is not None and which == "all" and s == 1.0:
            sw = unit_sweep
        else:
            sw = run_sweep(cfg, use_cache, decomposition=False)
        idx = [int(np.argmin(np.abs(sw.times - t))) for t in (20.0, 100.0, 300.0)
               if t <= sw.times[-1]]
        n = sw.norms(indices=idx)
        row = {"scale": s, "t": [float(sw.times[i]) for i in idx],
               "Linf": [float(n["Linf"][i]) for i in idx], "L2": [float(n["L2"][i]) for i in idx]}
        if ref is None:
            ref = row
        row["Linf_ratio"] = [a / (s / ref["scale"] * b) for a, b in zip(row["Linf"], ref["Linf"])]
        row["L2_ratio"] = [a / (s / ref["scale"] * b) for a, b in zip(row["L2"], ref["L2"])]
        rows.append(row)
    return {"which": which, "rows": rows}


def decomposition_report(sweep):
    """Share of each (outer part x inner part x time half) in the norms at
    the decomposition time, and the residual of their sum against the total."""
    cfg = sweep.config
    td = cfg.decomposition_time
    k = int(np.argmin(np.abs(sweep.times - td)))
    total_inf, loc = sweep.linf(sweep.coef[:, k], sweep.times[k], cfg.beta)
    rows = {}
    summed = np.zeros_like(sweep.coef[:, k])
    for p, cf in sweep.parts.items():
        summed += cf
        val, _ = sweep.linf(cf, td, cfg.beta)
        rows[p] = {"Linf": val, "share": val / total_inf,
                   "L2": sweep.linf_l2(sweep.parts_l2x[p], cfg.beta)}
    resid = float(np.max(np.abs(summed - sweep.coef[:, k])) / np.max(np.abs(sweep.coef[:, k])))
    # the outer-fluid x inner-fluid share over the whole interval
    ff = sweep.parts.get("LFxLF:early", 0) + sweep.parts.get("LFxLF:late", 0)
    ff_val, _ = sweep.linf(ff, td, cfg.beta)
    return {"t": float(sweep.times[k]), "Linf_total": total_inf, "rows": rows,
            "sum_residual": resid, "fluid_fluid_share": ff_val / total_inf}
