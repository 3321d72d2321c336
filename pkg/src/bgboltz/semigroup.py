"""Fourier-mode evolution, the three-part split and x-space norms.

A solution with initial datum ``phi(x) psi(xi)`` is evolved one wavenumber
at a time.  With an isotropic ``psi`` the mode for wavevector ``r omega`` is
the rotation of the mode for ``r e_3``, so only the axial problem in sector
0 is solved.  x-space quantities follow from Plancherel (L2) and from a
Funk-Hecke synthesis over Legendre coefficients in the cosine variable
(pointwise values), both as one-dimensional quadratures in ``r``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import eval_legendre, gammaincc, roots_legendre, spherical_jn

from .collision import (CollisionModel, OperatorMatrix, assemble_operators, nu_values,
                        project_P1)
from .fitting import DecayFit, fit_decay, fit_exponential, geometric_times
from .grid import GridFunction, build_grid, chi_basis, japanese
from .spectrum import SECTOR_BRANCHES, assemble_wave_operator, choose_delta

PARTS = ("Full", "LongFluid", "LongNonFluid", "Short", "LongAcoustic")


class SemigroupError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# x-profiles
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpaceProfile:
    """Radial Gaussian ``amplitude * exp(-|x|^2 / (2 width^2))``."""
    width: float = 1.0
    amplitude: float = 1.0
    kind: str = "RadialGaussian"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.amplitude * np.exp(-np.sum(x * x, axis=-1) / (2 * self.width ** 2))

    def fourier(self, r):
        w2 = self.width ** 2
        return self.amplitude * (2 * np.pi * w2) ** 1.5 * np.exp(-w2 * np.asarray(r) ** 2 / 2)

    @property
    def L1(self):
        return self.amplitude * (2 * np.pi * self.width ** 2) ** 1.5

    @property
    def L2(self):
        return self.amplitude * (np.pi * self.width ** 2) ** 0.75

    @property
    def Linf(self):
        return self.amplitude

    def plancherel_tail(self, r_max):
        """Fraction of ``int r^2 |phi_hat|^2 dr`` beyond ``r_max``."""
        return float(gammaincc(1.5, (self.width * r_max) ** 2))


# --------------------------------------------------------------------------
# wavenumber grid and cutoff
# --------------------------------------------------------------------------

DEFAULT_PANELS = ((0.0, 0.4, 0.025, 8), (0.4, 1.2, 0.1, 6), (1.2, 8.0, 0.4, 6))


def wavenumber_grid(panels=DEFAULT_PANELS):
    """Composite Gauss-Legendre nodes and weights for ``int_0^{r_max} dr``.

    ``panels`` holds ``(start, stop, panel width, points per panel)``.
    """
    nodes, weights = [], []
    for lo, hi, width, npts in panels:
        k = int(round((hi - lo) / width))
        x, w = roots_legendre(npts)
        e = np.linspace(lo, hi, k + 1)
        a, b = e[:-1, None], e[1:, None]
        nodes.append(((a + b) / 2 + (b - a) / 2 * x).ravel())
        weights.append(((b - a) / 2 * w).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def smooth_cutoff(r, delta):
    """Quintic step: 1 on ``r <= delta/2``, 0 on ``r >= delta``, C^2 in between."""
    x = np.clip((delta - np.asarray(r, dtype=float)) / (delta / 2), 0.0, 1.0)
    return x ** 3 * (10 - 15 * x + 6 * x * x)


# --------------------------------------------------------------------------
# per-mode evolution
# --------------------------------------------------------------------------

@dataclass
class ModeSolution:
    r: float
    times: np.ndarray
    coefficients: np.ndarray
    part: str = "Full"
    sector: int = 0
    fallback: bool = False

    def at(self, k, grid):
        return GridFunction(grid, self.coefficients[k], self.sector)


@dataclass
class ModalDecomposition:
    eigenvalues: np.ndarray
    vectors: np.ndarray
    condition: float


def modal_decomposition(wave, max_condition=1e10):
    lam, V = np.linalg.eig(wave.entries)
    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond) or cond > max_condition:
        return None
    return ModalDecomposition(lam, V, cond)


def _expm_series(A, psi, times):
    out = np.empty((len(times), len(psi)), dtype=complex)
    for k, t in enumerate(times):
        out[k] = psi if t == 0 else scipy.linalg.expm(A * t) @ psi
    return out


def evolve_mode(wave, psi, times, modal=None):
    """``exp((-i r xi_3 + L) t) psi`` at the requested times.

    Uses the eigendecomposition when its condition number is acceptable and
    scaling-and-squaring otherwise (``fallback`` is then set).
    """
    times = np.asarray(times, dtype=float)
    psi_v = np.asarray(psi.values if isinstance(psi, GridFunction) else psi, dtype=complex)
    modal = modal_decomposition(wave) if modal is None else modal
    if modal is None:
        vals = _expm_series(wave.entries, psi_v, times)
        return ModeSolution(wave.r, times, vals, "Full", wave.sector, True)
    c = np.linalg.solve(modal.vectors, psi_v)
    E = np.exp(np.outer(times, modal.eigenvalues))
    vals = (E * c[None, :]) @ modal.vectors.T
    vals[times == 0] = psi_v
    return ModeSolution(wave.r, times, vals, "Full", wave.sector, False)


def split_mode(wave, psi, times, delta, modal=None):
    """Long-fluid, long-non-fluid and short parts of one mode.

    The fluid part keeps the slow eigenpairs (three in sector 0, one in
    sector 1) weighted by ``chi_delta(r)``; the non-fluid part is the sum
    over the remaining eigenpairs, so no cancellation against the full
    solution takes place.  ``LongAcoustic`` is the acoustic pair alone.
    """
    times = np.asarray(times, dtype=float)
    psi_v = np.asarray(psi.values if isinstance(psi, GridFunction) else psi, dtype=complex)
    m = wave.sector
    chi = float(smooth_cutoff(wave.r, delta))
    modal = modal_decomposition(wave) if modal is None else modal
    n_slow = len(SECTOR_BRANCHES.get(m, ()))
    if modal is None:
        full = _expm_series(wave.entries, psi_v, times)
        if chi > 0:
            raise SemigroupError(f"ill-conditioned eigenbasis inside the long-wave range r={wave.r}")
        z = np.zeros_like(full)
        parts = {"Full": full, "LongFluid": z, "LongNonFluid": z.copy(), "Short": full.copy(),
                 "LongAcoustic": z.copy()}
        return {k: ModeSolution(wave.r, times, v, k, m, True) for k, v in parts.items()}
    lam, V = modal.eigenvalues, modal.vectors
    c = np.linalg.solve(V, psi_v)
    order = np.argsort(np.abs(lam.real), kind="stable")
    slow, rest = order[:n_slow], order[n_slow:]
    acoustic = []
    if m == 0 and n_slow == 3:
        im = lam[slow].imag
        acoustic = [slow[int(np.argmin(im))], slow[int(np.argmax(im))]]

    def combo(idx):
        if len(idx) == 0:
            return np.zeros((len(times), len(psi_v)), dtype=complex)
        idx = np.asarray(idx)
        E = np.exp(np.outer(times, lam[idx]))
        return (E * c[idx][None, :]) @ V[:, idx].T

    fluid = combo(slow)
    nonfluid = combo(rest)
    full = fluid + nonfluid
    full[times == 0] = psi_v
    parts = {"Full": full, "LongFluid": chi * fluid, "LongNonFluid": chi * nonfluid,
             "Short": (1 - chi) * full, "LongAcoustic": chi * combo(acoustic)}
    return {k: ModeSolution(wave.r, times, v, k, m, False) for k, v in parts.items()}


# --------------------------------------------------------------------------
# sweep over wavenumbers and x-space norms
# --------------------------------------------------------------------------

def legendre_matrix(grid):
    """``T[l, b]`` mapping nodal cosine values to Legendre coefficients."""
    n = grid.n_cosine
    l = np.arange(n)[:, None]
    return (2 * l + 1) / 2 * eval_legendre(l, grid.cosine_nodes[None, :]) * grid.cosine_weights[None, :]


@dataclass
class ModeSweep:
    """Mode data over the wavenumber grid, stored as Legendre coefficients.

    ``parts[name]`` has shape ``(n_r, n_t, n_speed, n_l)``.
    """
    grid: object
    profile: SpaceProfile
    r: np.ndarray
    r_weights: np.ndarray
    times: np.ndarray
    delta: float
    parts: dict = field(default_factory=dict)
    fallback_count: int = 0

    def _xi_norm2(self, U):
        g = self.grid
        lw = 2.0 / (2 * np.arange(g.n_cosine) + 1)
        return 2 * np.pi * np.einsum("a,l,...al->...", g.speed_weights, lw, np.abs(U) ** 2)

    def l2l2(self, part):
        """``|u(t)|_{L^2_x L^2_xi}`` for every stored time."""
        U = self.parts[part]
        w = self.r_weights * self.r ** 2 * self.profile.fourier(self.r) ** 2
        return np.sqrt(4 * np.pi / (2 * np.pi) ** 3 * np.einsum("r,rt->t", w, self._xi_norm2(U)))

    def linf_beta_l2x(self, part, beta):
        """``max_xi <xi>^beta |u(t, ., xi)|_{L^2_x}`` (speed nodes)."""
        g = self.grid
        U = self.parts[part]
        lw = 2.0 / (2 * np.arange(g.n_cosine) + 1)
        w = self.r_weights * self.r ** 2 * self.profile.fourier(self.r) ** 2
        per_s = 2 * np.pi * np.einsum("r,l,rtal->ta", w, lw, np.abs(U) ** 2) / (2 * np.pi) ** 3
        return np.max(japanese(g.speed_nodes)[None, :] ** beta * np.sqrt(per_s), axis=1)

    def radial_coefficients(self, part, k, radii):
        """Legendre coefficients ``I_l(s, |x|)`` of ``u(t_k, x, .)`` in ``x . xi``."""
        U = self.parts[part][:, k]
        g = self.grid
        w = self.r_weights * self.r ** 2 * self.profile.fourier(self.r) / (2 * np.pi ** 2)
        out = np.empty((len(radii), g.n_speed, g.n_cosine), dtype=complex)
        rx = np.outer(radii, self.r)
        for l in range(g.n_cosine):
            J = spherical_jn(l, rx) * w[None, :]
            out[:, :, l] = (1j ** l) * (J @ U[:, :, l])
        return out

    def radial_profile(self, part, k, radii):
        """``|u(t_k, x)|_{L^2_xi}`` as a function of ``|x|``."""
        return np.sqrt(self._xi_norm2(self.radial_coefficients(part, k, radii)))

    def pointwise(self, part, k, radius, cos_x):
        """Nodal ``u(t_k, x, xi)`` with ``x . xi = |x||xi| cos_x``."""
        I = self.radial_coefficients(part, k, np.array([radius]))[0]
        P = eval_legendre(np.arange(self.grid.n_cosine)[:, None], np.atleast_1d(cos_x)[None, :])
        return I @ P

    def x_window(self, t):
        return 1.3 * np.sqrt(5 / 3) * t + 8 * np.sqrt(1 + t) + 6 * self.profile.width

    def linf_x(self, part, n_x=400):
        """``max_x |u(t, x)|_{L^2_xi}`` with the maximizing radius."""
        vals, where = [], []
        for k, t in enumerate(self.times):
            radii = np.linspace(0.0, self.x_window(t), n_x)
            prof = self.radial_profile(part, k, radii)
            i = int(np.argmax(prof))
            vals.append(prof[i])
            where.append(radii[i])
        return np.array(vals), np.array(where)


def default_times():
    t = np.concatenate([[0.0], np.linspace(0.25, 8.0, 32), geometric_times(0.1, 300.0, 12)])
    return np.unique(np.round(t, 12))


def solve_sweep(L, grid, psi, times=None, delta=0.5, profile=None, r_grid=None, jobs=1,
                parts=PARTS, tail_tol=0.01):
    """Evolve ``phi(x) psi(xi)`` over the wavenumber grid (sector of ``psi``)."""
    profile = SpaceProfile() if profile is None else profile
    times = default_times() if times is None else np.asarray(times, dtype=float)
    r, wr = wavenumber_grid() if r_grid is None else r_grid
    tail = profile.plancherel_tail(r.max() if r_grid is None else r[-1] + wr[-1])
    if tail > tail_tol:
        raise SemigroupError(f"wavenumber grid too short: Plancherel tail {tail:.2e}")
    m = psi.sector
    g = grid.with_sector(m)
    T = legendre_matrix(g)
    ns, nc = g.shape

    def one(rv):
        wave = assemble_wave_operator(L, g, rv)
        sol = split_mode(wave, psi, times, delta)
        out = {}
        for name in parts:
            v = sol[name].coefficients.reshape(len(times), ns, nc)
            out[name] = np.einsum("tab,lb->tal", v, T)
        return out, sol["Full"].fallback

    store = {name: np.empty((len(r), len(times), ns, nc), dtype=complex) for name in parts}
    fb = 0
    with ThreadPoolExecutor(max_workers=max(1, int(jobs))) as pool:
        for i, (res, flag) in enumerate(pool.map(one, r)):
            for name in parts:
                store[name][i] = res[name]
            fb += int(flag)
    return ModeSweep(g, profile, r, wr, times, delta, store, fb)


# --------------------------------------------------------------------------
# damped transport
# --------------------------------------------------------------------------

def damped_transport(profile, psi, t, x, model=None):
    """``exp(-nu(xi) t) phi(x - xi t) psi(xi)`` at the grid nodes (azimuth 0)."""
    model = CollisionModel() if model is None else model
    grid = psi.grid
    xi = grid.cartesian(0.0)
    nu = nu_values(model, xi)
    shifted = np.asarray(x, dtype=float)[None, :] - xi * t
    return np.exp(-nu * t) * profile(shifted) * psi.values


# --------------------------------------------------------------------------
# initial data
# --------------------------------------------------------------------------

def fluid_datum(grid):
    """Isotropic datum ``chi_0`` (mass perturbation)."""
    return chi_basis(grid.with_sector(0), 0)["chi0"]


def acoustic_datum(grid):
    """Isotropic datum projecting onto the two acoustic branches only."""
    b = chi_basis(grid.with_sector(0), 0)
    return b["chi0"] * 0.6 + b["chi4"] * (2 * np.sqrt(3 / 50))


def thermal_datum(grid):
    b = chi_basis(grid.with_sector(0), 0)
    return b["chi0"] * (-np.sqrt(2 / 5)) + b["chi4"] * np.sqrt(3 / 5)


def nonfluid_datum(grid):
    """Isotropic datum with vanishing fluid projection (discrete ``P_1``)."""
    g = grid.with_sector(0)
    s = g.s
    f = GridFunction(g, (s ** 4 - 10 * s ** 2 + 15) / np.sqrt(120) * (2 * np.pi) ** -0.75
                     * np.exp(-s ** 2 / 4), 0)
    return project_P1(f)


# --------------------------------------------------------------------------
# decay suite
# --------------------------------------------------------------------------

PREDICTED = {
    ("momentum", "L2"): -0.75,
    ("momentum", "Linf"): -1.5,
    ("heat_flux", "L2"): -1.25,
    ("heat_flux", "Linf"): -2.0,
}
STEEPENING = 0.5


def _exp_window(t, y, t0, floor=1e-11, t_max=None):
    t_max = t[-1] if t_max is None else t_max
    ref = y[np.argmin(np.abs(t - t0))]
    ok = (t >= t0) & (t <= t_max) & (y > floor * ref)
    return (t0, float(t[ok].max()))


@dataclass
class SuiteResult:
    delta: float
    gap: float
    series: dict
    fits: dict
    exponential: dict
    wave: dict
    exploratory: dict = field(default_factory=dict)

    def steepening(self, norm):
        return self.fits[("momentum", norm)].exponent - self.fits[("heat_flux", norm)].exponent


def decay_suite(model=None, grid=None, window=(10.0, 300.0), jobs=1, use_cache=True,
                times=None, r_grid=None, wave_times=(20.0, 50.0, 100.0, 200.0),
                isotropic=True, n_dir=5):
    """Decay slopes of the long-fluid part for dipole data with and without a
    fluid component, the exponential character of the other two parts, and the
    sound-cone scan.

    The two dipole classes are the momentum profile (nonzero fluid part) and
    the heat-flux profile (zero fluid part).  With ``isotropic`` the radial
    classes are also run and reported under ``exploratory``: by parity their
    first-order fluid coupling vanishes, so they steepen by a full power.
    """
    model = CollisionModel() if model is None else model
    grid = build_grid(24, 12, 8.0) if grid is None else grid
    ops = assemble_operators(model, grid, (0, 1), use_cache)
    Ls = {m: ops[m]["L"] for m in (0, 1)}
    delta, gap = choose_delta(Ls, grid)
    if times is None:
        times = np.concatenate([[0.0], geometric_times(window[0], window[1], 12)])
    series, fits, expo, explo = {}, {}, {}, {}
    for name, h in (("momentum", momentum_profile), ("heat_flux", heat_flux_profile)):
        sw = solve_dipole_sweep(Ls, grid, h, times, delta, r_grid=r_grid, jobs=jobs)
        l2 = sw.l2l2("LongFluid")
        linf, arg = sw.linf_x("LongFluid", n_dir=n_dir)
        series[name] = {"t": sw.times, "LongFluid_L2": l2, "LongFluid_Linf": linf,
                        "LongFluid_argmax": arg, "Full_L2": sw.l2l2("Full")}
        fits[(name, "L2")] = fit_decay(sw.times, l2, window)
        fits[(name, "Linf")] = fit_decay(sw.times[1:], linf[1:], window)
    iso = (("fluid", fluid_datum(grid)), ("nonfluid", nonfluid_datum(grid))) if isotropic else ()
    iso_times = default_times()
    for name, psi in iso:
        sw = solve_sweep(Ls[0], grid, psi, iso_times, delta, r_grid=r_grid, jobs=jobs,
                         parts=("Full", "LongFluid", "LongNonFluid", "Short"))
        entry = {"t": sw.times, "LongFluid_L2": sw.l2l2("LongFluid"),
                 "LongNonFluid_L2": sw.l2l2("LongNonFluid"), "Short_L2": sw.l2l2("Short")}
        entry["fit_L2"] = fit_decay(sw.times, entry["LongFluid_L2"], window)
        explo[name] = entry
        for part, t0 in (("LongNonFluid", 0.5), ("Short", 1.0)):
            y = entry[f"{part}_L2"]
            expo[(name, part)] = fit_exponential(sw.times, y, _exp_window(sw.times, y, t0))
    wave = wave_structure_scan(Ls[0], grid, delta, wave_times, r_grid=r_grid, jobs=jobs)
    return SuiteResult(delta, gap, series, fits, expo, wave, explo)


def wave_structure_scan(L, grid, delta, t_values=(20.0, 50.0, 100.0, 200.0), datum="acoustic",
                        r_grid=None, jobs=1, n_x=800):
    """Radius of the outer peak of ``|u(t, x)|_{L^2_xi}`` for the long-wave
    acoustic component, divided by ``t``."""
    psi = acoustic_datum(grid) if datum == "acoustic" else thermal_datum(grid)
    part = "LongAcoustic" if datum == "acoustic" else "LongFluid"
    times = np.concatenate([[0.0], np.asarray(t_values, dtype=float)])
    sw = solve_sweep(L, grid, psi, times, delta, r_grid=r_grid, jobs=jobs, parts=(part,))
    rows = []
    for k, t in enumerate(times):
        radii = np.linspace(0.0, sw.x_window(t), n_x)
        prof = sw.radial_profile(part, k, radii)
        peak = outer_peak(radii, prof)
        center = pulse_center(radii, prof)
        rows.append({"t": float(t), "peak_radius": peak, "center_radius": center,
                     "peak_speed": (peak / t) if (peak is not None and t > 0) else None,
                     "center_speed": (center / t) if (center is not None and t > 0) else None})
    return {"datum": datum, "rows": rows}


def lobe_peaks(radii, prof, rel=0.05):
    """Radii of local maxima exceeding ``rel`` times the global maximum,
    refined by a parabola through the neighbouring samples."""
    top = prof.max()
    idx = [i for i in range(1, len(prof) - 1)
           if prof[i] >= prof[i - 1] and prof[i] > prof[i + 1] and prof[i] >= rel * top]
    if prof[0] >= prof[1] and prof[0] >= rel * top:
        idx = [0] + idx
    out = []
    h = radii[1] - radii[0]
    for i in idx:
        if 0 < i < len(prof) - 1:
            y0, y1, y2 = prof[i - 1], prof[i], prof[i + 1]
            den = y0 - 2 * y1 + y2
            off = 0.5 * (y0 - y2) / den if den != 0 else 0.0
            out.append(float(radii[i] + off * h))
        else:
            out.append(float(radii[i]))
    return out


def outer_peak(radii, prof, rel=0.05):
    """Largest radius of a local maximum exceeding ``rel`` times the global max."""
    peaks = lobe_peaks(radii, prof, rel)
    return peaks[-1] if peaks else None


def pulse_center(radii, prof, rel=0.05):
    """Midpoint of the two outermost lobes of a two-lobed outgoing pulse.

    An outgoing acoustic pulse has a node at the wave front with one lobe
    on each side, so the midpoint tracks the front without the bias of the
    growing pulse width.  Returns None when fewer than two lobes are found.
    """
    peaks = [p for p in lobe_peaks(radii, prof, rel) if p > 0]
    if len(peaks) < 2:
        return None
    return 0.5 * (peaks[-1] + peaks[-2])


# --------------------------------------------------------------------------
# dipole data h(|xi|) (xi . e_3) / |xi|
# --------------------------------------------------------------------------
#
# For the wavevector r omega, write e_3 = cos(theta) omega + sin(theta) e_perp.
# The datum splits into the sector-0 function h(s) c and the sector-1
# function h(s) sqrt(1 - c^2) of the omega-frame, which evolve independently.
# Recombining gives
#     v(r omega, xi) = (omega . e_3) A(r; s, omega . xi_hat)
#                      + (xi_hat . e_3) B(r; s, omega . xi_hat)
# with A = U0 - c U1 / sqrt(1 - c^2) and B = U1 / sqrt(1 - c^2).  The factor
# (omega . e_3) becomes -i r^{-1} d/dx_3 under the inverse transform.

def momentum_profile(s):
    """``h(s)`` with ``h(s) c`` the normalized momentum invariant."""
    return s * (2 * np.pi) ** -0.75 * np.exp(-np.asarray(s) ** 2 / 4)


def heat_flux_profile(s):
    """``h(s)`` of the heat-flux moment; orthogonal to every invariant."""
    s = np.asarray(s)
    return s * (s * s - 5) / np.sqrt(10) * (2 * np.pi) ** -0.75 * np.exp(-s * s / 4)


def sphere_rule(n_theta=16, n_phi=32):
    ct, wt = roots_legendre(n_theta)
    ph = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    st = np.sqrt(1 - ct ** 2)
    d = np.stack([np.outer(st, np.cos(ph)), np.outer(st, np.sin(ph)),
                  np.outer(ct, np.ones(n_phi))], axis=-1).reshape(-1, 3)
    return d, np.repeat(wt, n_phi) * (2 * np.pi / n_phi)


def _jl_over_z(l, z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < 1e-8
    out[~small] = spherical_jn(l, z[~small]) / z[~small]
    out[small] = 1.0 / 3.0 if l == 1 else 0.0
    return out


@dataclass
class DipoleSweep:
    """Mode data of dipole initial data over the wavenumber grid.

    ``A[part]`` and ``B[part]`` hold Legendre coefficients of shape
    ``(n_r, n_t, n_speed, n_l)``; ``xi_norm2[part]`` holds the squared
    velocity norm averaged over wavevector directions, shape ``(n_r, n_t)``.
    """
    grid: object
    profile: SpaceProfile
    r: np.ndarray
    r_weights: np.ndarray
    times: np.ndarray
    delta: float
    A: dict = field(default_factory=dict)
    B: dict = field(default_factory=dict)
    xi_norm2: dict = field(default_factory=dict)

    def l2l2(self, part):
        w = self.r_weights * self.r ** 2 * self.profile.fourier(self.r) ** 2
        return np.sqrt(4 * np.pi / (2 * np.pi) ** 3 * np.einsum("r,rt->t", w, self.xi_norm2[part]))

    def x_window(self, t):
        return 1.3 * np.sqrt(5 / 3) * t + 8 * np.sqrt(1 + t) + 6 * self.profile.width

    def field_values(self, part, k, radii, x_dir, dirs):
        """``u(t_k, |x| x_dir, s_a xi_hat_d)`` for all radii, speeds and directions."""
        g = self.grid
        nl = g.n_cosine
        wA = self.r_weights * self.r ** 2 * self.profile.fourier(self.r) / (2 * np.pi ** 2)
        A = self.A[part][:, k]
        B = self.B[part][:, k]
        rx = np.outer(radii, self.r)
        q = dirs @ x_dir
        x3 = x_dir[2]
        xi3 = dirs[:, 2]
        u = np.zeros((len(radii), g.n_speed, len(dirs)), dtype=complex)
        for l in range(nl):
            jd = spherical_jn(l, rx, derivative=True) * wA[None, :]
            jz = _jl_over_z(l, rx) * (wA * self.r)[None, :]
            jb = spherical_jn(l, rx) * wA[None, :]
            Pl = eval_legendre(l, q)
            cl = np.zeros(l + 1)
            cl[l] = 1.0
            dPl = np.polynomial.legendre.legval(q, np.polynomial.legendre.legder(cl)) if l else 0 * q
            IA_d = jd @ A[:, :, l]
            IA_z = jz @ A[:, :, l]
            IB = jb @ B[:, :, l]
            ph = 1j ** l
            u += ph * (-1j) * (IA_d[:, :, None] * (Pl * x3)[None, None, :]
                              + IA_z[:, :, None] * (dPl * (xi3 - q * x3))[None, None, :])
            u += ph * IB[:, :, None] * (xi3 * Pl)[None, None, :]
        return u

    def linf_x(self, part, n_x=240, n_dir=9, sphere=(16, 32), indices=None):
        """``max_x |u(t, x)|_{L^2_xi}`` over a polar grid in the half space ``x_3 >= 0``."""
        dirs, wd = sphere_rule(*sphere)
        g = self.grid
        cos_x = np.linspace(0.0, 1.0, n_dir)
        vals = np.full(len(self.times), np.nan)
        where = np.full((len(self.times), 2), np.nan)
        ks = range(len(self.times)) if indices is None else indices
        for k in ks:
            t = self.times[k]
            radii = np.linspace(0.0, self.x_window(t), n_x)
            best, arg = -1.0, (0.0, 0.0)
            for cx in cos_x:
                xd = np.array([np.sqrt(1 - cx * cx), 0.0, cx])
                u = self.field_values(part, k, radii, xd, dirs)
                n2 = np.einsum("a,d,rad->r", g.speed_weights, wd, np.abs(u) ** 2)
                i = int(np.argmax(n2))
                if n2[i] > best:
                    best, arg = n2[i], (radii[i], cx)
            vals[k] = np.sqrt(best)
            where[k] = arg
        return vals, where


def dipole_data(grid, h):
    """Sector-0 and sector-1 nodal data of ``h(s) (xi_hat . e_3)`` in the wave frame."""
    g0, g1 = grid.with_sector(0), grid.with_sector(1)
    hs = h(g0.s)
    return (GridFunction(g0, hs * g0.c, 0),
            GridFunction(g1, hs * np.sqrt(1 - g1.c ** 2), 1))


def solve_dipole_sweep(L_by_sector, grid, h, times, delta, profile=None, r_grid=None,
                       jobs=1, parts=("Full", "LongFluid")):
    profile = SpaceProfile() if profile is None else profile
    times = np.asarray(times, dtype=float)
    r, wr = wavenumber_grid() if r_grid is None else r_grid
    psi0, psi1 = dipole_data(grid, h)
    g0, g1 = psi0.grid, psi1.grid
    T = legendre_matrix(g0)
    ns, nc = g0.shape
    sq = np.sqrt(1 - g0.cosine_nodes ** 2)
    W0 = g0.weights * g0.azimuthal_factor(0)
    W1 = g1.weights * g1.azimuthal_factor(1)

    def one(rv):
        s0 = split_mode(assemble_wave_operator(L_by_sector[0], g0, rv), psi0, times, delta)
        s1 = split_mode(assemble_wave_operator(L_by_sector[1], g1, rv), psi1, times, delta)
        out = {}
        for name in parts:
            U0 = s0[name].coefficients
            U1 = s1[name].coefficients
            n2 = (np.abs(U0) ** 2 @ W0) / 3 + 2 * (np.abs(U1) ** 2 @ W1) / 3
            U0 = U0.reshape(len(times), ns, nc)
            Ut = U1.reshape(len(times), ns, nc) / sq[None, None, :]
            Av = U0 - g0.cosine_nodes[None, None, :] * Ut
            out[name] = (np.einsum("tab,lb->tal", Av, T), np.einsum("tab,lb->tal", Ut, T), n2)
        return out

    sw = DipoleSweep(g0, profile, r, wr, times, delta)
    for name in parts:
        sw.A[name] = np.empty((len(r), len(times), ns, nc), dtype=complex)
        sw.B[name] = np.empty_like(sw.A[name])
        sw.xi_norm2[name] = np.empty((len(r), len(times)))
    with ThreadPoolExecutor(max_workers=max(1, int(jobs))) as pool:
        for i, res in enumerate(pool.map(one, r)):
            for name in parts:
                sw.A[name][i], sw.B[name][i], sw.xi_norm2[name][i] = res[name]
    return sw
