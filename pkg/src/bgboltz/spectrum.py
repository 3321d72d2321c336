"""Dispersion relation of ``-i r xi_3 + L`` and its five slow branches.

With the wavevector along the grid axis the operator splits into azimuthal
sectors.  Sector 0 carries the two acoustic branches and the thermal branch,
sector 1 the shear branch (the ``cos`` and ``sin`` copies of sector 1 are
identical, so branch 4 duplicates branch 3).

For real ``L`` the matrix ``W A(r)`` is complex symmetric, hence right
eigenvectors are orthogonal under the bilinear form ``x^T W y`` and the left
eigenvector belonging to ``e`` is ``W e``.  Normalizing ``A_m e^T W e = 1``
realizes the pairing between the eigenvectors at ``eta`` and ``-eta``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .collision import CollisionModel, OperatorMatrix, assemble_operators
from .grid import GridFunction, chi_basis, inner
from .maxwell import A, MaxwellianParams

BRANCH_SECTOR = {0: 0, 1: 0, 2: 0, 3: 1, 4: 1}
SECTOR_BRANCHES = {0: (0, 1, 2), 1: (3,)}


class TrackingError(RuntimeError):
    pass


@dataclass
class WaveOperator:
    r: float
    sector: int
    matrix: OperatorMatrix
    grid: object = field(repr=False, default=None)

    @property
    def entries(self):
        return self.matrix.entries


def assemble_wave_operator(L, grid, r):
    """``-i r xi_3 + L`` in the sector of ``L`` (wavevector along the axis)."""
    if r < 0:
        raise ValueError("wavenumber must be non-negative")
    xi3 = grid.center + grid.s * grid.c
    M = L.entries.astype(complex)
    if r != 0:
        M = M - 1j * r * np.diag(xi3)
    return WaveOperator(float(r), L.sector, OperatorMatrix(M, L.sector, "WaveOp"), grid)


def _normalize(grid, m, V):
    W = grid.weights * grid.azimuthal_factor(m)
    nb = np.sqrt(np.einsum("ij,i,ij->j", V, W, V))
    return V / nb[None, :]


def eigen_near_zero(op, count=None, previous=None, threshold=0.7):
    """The ``count`` eigenpairs closest to the imaginary axis.

    Eigenvalues are ordered by ``|Re|``; with ``previous`` (eigenvectors from
    the preceding wavenumber) the order follows maximal-overlap assignment.
    """
    m = op.sector
    count = len(SECTOR_BRANCHES.get(m, ())) if count is None else count
    lam, V = np.linalg.eig(op.entries)
    order = np.argsort(np.abs(lam.real), kind="stable")[:count]
    lam, V = lam[order], V[:, order]
    V = _normalize(op.grid, m, V)
    if previous is not None:
        W = op.grid.weights
        Pv = previous
        ov = np.abs((Pv.conj() * W[:, None]).T @ V)
        ov /= np.outer(np.sqrt(np.einsum("ij,i,ij->j", Pv.conj(), W, Pv).real),
                       np.sqrt(np.einsum("ij,i,ij->j", V.conj(), W, V).real))
        rows, cols = linear_sum_assignment(-ov)
        if np.min(ov[rows, cols]) < threshold:
            raise TrackingError(f"branch overlap {np.min(ov[rows, cols]):.3f} below {threshold}"
                                f" at r={op.r}")
        lam, V = lam[cols], V[:, cols]
    return list(zip(lam, V.T))


def full_eigensystem(op):
    """All eigenpairs with the bilinear normalization (left = W e)."""
    lam, V = np.linalg.eig(op.entries)
    return lam, _normalize(op.grid, op.sector, V)


def spectral_projector(op, vec):
    """Rank-one projector ``|e><e(-eta)|`` for the normalized eigenvector."""
    W = op.grid.weights * op.grid.azimuthal_factor(op.sector)
    return OperatorMatrix(np.outer(vec, vec * W), op.sector, "Projector")


# --------------------------------------------------------------------------
# reference eigenfunctions of the r -> 0 limit
# --------------------------------------------------------------------------

def reference_eigenfunctions(grid):
    """The five limiting fluid eigenfunctions ``E_j`` (wavevector on e_3)."""
    b0 = chi_basis(grid.with_sector(0), 0)
    b1 = chi_basis(grid.with_sector(1), 1)
    c0, c3, c4 = b0["chi0"].values, b0["chi3"].values, b0["chi4"].values
    g0 = grid.with_sector(0)
    E = {
        0: GridFunction(g0, np.sqrt(3 / 10) * c0 + np.sqrt(1 / 2) * c3 + np.sqrt(1 / 5) * c4, 0),
        1: GridFunction(g0, np.sqrt(3 / 10) * c0 - np.sqrt(1 / 2) * c3 + np.sqrt(1 / 5) * c4, 0),
        2: GridFunction(g0, -np.sqrt(2 / 5) * c0 + np.sqrt(3 / 5) * c4, 0),
        3: b1["chi1"],
        4: b1["chi1"],
    }
    return E


REFERENCE_SPEEDS = {0: np.sqrt(5 / 3), 1: -np.sqrt(5 / 3), 2: 0.0, 3: 0.0, 4: 0.0}


def _label_sector0(lams):
    """Indices (acoustic -, acoustic +, thermal) from imaginary parts."""
    order = np.argsort([l.imag for l in lams])
    return [order[0], order[2], order[1]]


# --------------------------------------------------------------------------
# branch tracking over a wavenumber scan
# --------------------------------------------------------------------------

@dataclass
class BranchData:
    r: np.ndarray
    eigenvalues: dict
    eigenvectors: dict
    grid: object = field(repr=False, default=None)


def track_branches(L_by_sector, grid, r_values, threshold=0.7):
    """Follow the five slow branches along increasing ``r``.

    ``L_by_sector`` maps sector -> :class:`OperatorMatrix`.  Branch labels
    are assigned at the smallest positive ``r`` from the signs of the
    imaginary parts and carried along by overlap matching.
    """
    r_values = np.asarray(sorted(r_values), dtype=float)
    vals = {j: [] for j in range(5)}
    vecs = {j: [] for j in range(5)}
    for m, branches in SECTOR_BRANCHES.items():
        prev = None
        labels = None
        for r in r_values:
            op = assemble_wave_operator(L_by_sector[m], grid.with_sector(m), r)
            pairs = eigen_near_zero(op, len(branches), prev, threshold)
            lam = np.array([p[0] for p in pairs])
            V = np.array([p[1] for p in pairs]).T
            if labels is None:
                if r == 0 and m == 0:
                    labels = None
                elif m == 0:
                    labels = _label_sector0(lam)
                else:
                    labels = [0]
            if labels is not None:
                for j, k in zip(branches, labels):
                    vals[j].append(lam[k])
                    vecs[j].append(V[:, k])
                lam, V = lam[labels], V[:, labels]
                labels = list(range(len(branches)))
            else:
                # r = 0: the zero eigenvalues are degenerate; record them and
                # let the first positive r fix the labels
                for j in branches:
                    vals[j].append(0.0 + 0.0j)
                    vecs[j].append(np.full(grid.size, np.nan))
                V = None
            prev = V
    vals[4] = list(vals[3])
    vecs[4] = list(vecs[3])
    return BranchData(r_values, {j: np.array(v) for j, v in vals.items()},
                      {j: np.array(v) for j, v in vecs.items()}, grid)


@dataclass
class BranchFit:
    branch_index: int
    a_j: float
    A_j: float
    fit_residual: float
    r_range: tuple


def fit_dispersion(samples, r_range=(0.01, 0.15)):
    """Fit ``Im lam = -a r + c r^3`` and ``Re lam = -A r^2 + d r^4``.

    ``samples`` is a list of ``(r, {j: eigenvalue})`` pairs.
    """
    r = np.array([s[0] for s in samples], dtype=float)
    sel = (r >= r_range[0] - 1e-14) & (r <= r_range[1] + 1e-14)
    if sel.sum() < 6:
        raise ValueError("need at least six samples inside the fit range")
    r = r[sel]
    fits = []
    branches = sorted(samples[0][1].keys())
    Mi = np.stack([-r, r ** 3], axis=1)
    Mr = np.stack([-r ** 2, r ** 4], axis=1)
    if np.linalg.cond(Mi) > 1e12 or np.linalg.cond(Mr) > 1e12:
        raise ValueError("ill-conditioned dispersion fit")
    for j in branches:
        lam = np.array([s[1][j] for s, keep in zip(samples, sel) if keep])
        ci, resi, *_ = np.linalg.lstsq(Mi, lam.imag, rcond=None)
        cr, resr, *_ = np.linalg.lstsq(Mr, lam.real, rcond=None)
        res = np.sqrt(np.mean((Mi @ ci - lam.imag) ** 2 + (Mr @ cr - lam.real) ** 2))
        fits.append(BranchFit(j, float(ci[0]), float(cr[0]), float(res),
                              (float(r.min()), float(r.max()))))
    return fits


def samples_from_branches(data):
    return [(float(r), {j: data.eigenvalues[j][k] for j in range(5)})
            for k, r in enumerate(data.r)]


def leading_eigenfunctions(data, r_probe=None):
    """Normalized overlaps ``|<e_j(r), E_l>|`` at the smallest tracked ``r``."""
    grid = data.grid
    k = int(np.argmin(np.where(data.r > 0, data.r, np.inf))) if r_probe is None else \
        int(np.argmin(np.abs(data.r - r_probe)))
    E = reference_eigenfunctions(grid)
    table = np.zeros((5, 5))
    for j in range(5):
        mj = BRANCH_SECTOR[j]
        ej = GridFunction(grid.with_sector(mj), data.eigenvectors[j][k], mj)
        nj = np.sqrt(abs(inner(ej, ej)))
        for l in range(5):
            if BRANCH_SECTOR[l] != mj:
                continue
            El = E[l]
            table[j, l] = abs(inner(ej, El)) / (nj * np.sqrt(abs(inner(El, El))))
    # branch 4 lives in the sin copy of sector 1: orthogonal to branch 3
    table[3, 4] = table[4, 3] = 0.0
    return {"r": float(data.r[k]), "overlap": table}


# --------------------------------------------------------------------------
# gap and long-wave cutoff
# --------------------------------------------------------------------------

def spectral_gap(L_by_sector):
    """Smallest nonzero ``|eigenvalue|`` over the given sectors."""
    best = np.inf
    for m, L in L_by_sector.items():
        ev = np.sort(np.abs(np.linalg.eigvals(L.entries).real))
        nz = len(SECTOR_BRANCHES.get(m, ()))
        best = min(best, ev[nz])
    return float(best)


def branch_separation(L_by_sector, grid, r):
    """``min |Re|`` of the rest minus ``max |Re|`` of the tracked branches."""
    sep = np.inf
    slow = 0.0
    rest = np.inf
    for m, L in L_by_sector.items():
        op = assemble_wave_operator(L, grid.with_sector(m), r)
        re = np.sort(np.abs(np.linalg.eigvals(op.entries).real))
        nb = len(SECTOR_BRANCHES.get(m, ()))
        if nb:
            slow = max(slow, re[nb - 1])
        rest = min(rest, re[nb])
    sep = rest - slow
    return float(sep), float(slow), float(rest)


def choose_delta(L_by_sector, grid, r_scan=None, fraction=0.5):
    """Largest ``r`` keeping separation >= fraction * gap, then halved."""
    r_scan = np.linspace(0.05, 3.0, 60) if r_scan is None else np.asarray(r_scan)
    gap = spectral_gap(L_by_sector)
    last = 0.0
    for r in r_scan:
        sep, _, _ = branch_separation(L_by_sector, grid, r)
        if sep < fraction * gap:
            break
        last = r
    return 0.5 * last, gap


def max_real_part(op):
    return float(np.max(np.linalg.eigvals(op.entries).real))


# --------------------------------------------------------------------------
# background scaling
# --------------------------------------------------------------------------

def scaling_factor(b, gamma):
    """Rate factor ``rho lam^{gamma/2}`` relating the two collision operators."""
    return b.rho * b.lam ** (gamma / 2)


def predicted_branch(b, gamma, lam_a_fun, r):
    """Eigenvalue of background ``b`` predicted from background-a data.

    Under ``xi = mu + sqrt(lam) xi~`` one has ``L_b = k S L_a S^-1`` with
    ``k = rho lam^{gamma/2}`` and ``xi_3 = mu_3 + sqrt(lam) xi~_3``, so
    ``lam_b(r) = -i mu_3 r + k lam_a(r sqrt(lam) / k)``.
    """
    k = scaling_factor(b, gamma)
    return -1j * b.mu_axial * r + k * lam_a_fun(r * np.sqrt(b.lam) / k)


def predicted_coefficients(b, gamma, fits_a):
    """``a_j`` and ``A_j`` of background ``b`` from those of background a."""
    k = scaling_factor(b, gamma)
    out = {}
    for f in fits_a:
        out[f.branch_index] = (b.mu_axial + np.sqrt(b.lam) * f.a_j, f.A_j * b.lam / k)
    return out


def dispersion_fits(model, grid, r_values=None, use_cache=True, ops=None):
    r_values = np.linspace(0.01, 0.15, 15) if r_values is None else r_values
    if ops is None:
        ops = assemble_operators(model, grid, (0, 1), use_cache)
    Ls = {m: ops[m]["L"] for m in (0, 1)}
    data = track_branches(Ls, grid, r_values)
    return fit_dispersion(samples_from_branches(data), (min(r_values), max(r_values))), data


def temperature_scaling_check(pair, model=None, grid=None, r_values=None, adapted=False,
                              use_cache=True):
    """Compare fitted ``(a_j, A_j)`` of background b with the scaled prediction.

    With ``adapted`` the operator of background b is assembled on the grid
    rescaled by ``sqrt(lam)`` and shifted by ``mu`` (the exact image of the
    reference grid); otherwise on the reference grid itself.
    """
    from .grid import build_grid
    model = CollisionModel() if model is None else model
    grid = build_grid(24, 12, 8.0) if grid is None else grid
    b = pair.b
    fits_a, _ = dispersion_fits(model.with_background(A), grid, r_values, use_cache)
    gb = grid
    if adapted:
        gb = build_grid(grid.n_speed, grid.n_cosine, grid.s_max * np.sqrt(b.lam), 0,
                        temperature=b.lam, center=b.mu_axial)
    fits_b, _ = dispersion_fits(model.with_background(b), gb, r_values, use_cache)
    pred = predicted_coefficients(b, model.gamma, fits_a)
    rows = []
    for f in fits_b:
        pa, pA = pred[f.branch_index]
        rows.append({"branch": f.branch_index, "a_b": f.a_j, "a_pred": pa,
                     "A_b": f.A_j, "A_pred": pA,
                     "A_ratio": f.A_j / [g for g in fits_a if g.branch_index == f.branch_index][0].A_j,
                     "A_rel_err": abs(f.A_j - pA) / abs(pA)})
    return {"b": [b.rho, list(b.mu), b.lam], "gamma": model.gamma, "rows": rows,
            "max_rel_err": max(r["A_rel_err"] for r in rows)}
