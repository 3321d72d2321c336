import numpy as np
import pytest
import scipy.linalg

from bgboltz.collision import CollisionModel, assemble_operators
from bgboltz.grid import build_grid, inner
from bgboltz.semigroup import (SpaceProfile, acoustic_datum, evolve_mode, fluid_datum,
                               lobe_peaks, nonfluid_datum, outer_peak, pulse_center,
                               smooth_cutoff, solve_sweep, split_mode, wavenumber_grid)
from bgboltz.spectrum import assemble_wave_operator


@pytest.fixture(scope="module")
def setup():
    grid = build_grid(12, 8, 8.0)
    ops = assemble_operators(CollisionModel(), grid, (0, 1))
    return grid, ops[0]["L"]


def test_cutoff_profile():
    r = np.array([0.0, 0.5, 1.0, 1.5, 3.0])
    c = smooth_cutoff(r, 1.0)
    assert c[0] == 1.0 and c[-1] == 0.0
    assert np.all(np.diff(c) <= 0)


def test_profile_plancherel():
    p = SpaceProfile(width=1.3)
    r, w = wavenumber_grid()
    l2sq = np.sum(w * r ** 2 * p.fourier(r) ** 2) * 4 * np.pi / (2 * np.pi) ** 3
    assert np.sqrt(l2sq) == pytest.approx(p.L2, rel=1e-8)
    assert p.fourier(0.0) == pytest.approx(p.L1)


def test_modal_evolution_matches_exponential(setup):
    grid, L = setup
    w = assemble_wave_operator(L, grid, 0.7)
    psi = acoustic_datum(grid)
    sol = evolve_mode(w, psi, [0.0, 2.5])
    ref = scipy.linalg.expm(2.5 * w.entries) @ psi.values
    assert np.allclose(sol.coefficients[1], ref, atol=1e-10)
    assert np.allclose(sol.coefficients[0], psi.values)


def test_parts_sum_to_full_solution(setup):
    grid, L = setup
    psi = nonfluid_datum(grid)
    for r in (0.1, 0.6, 1.2, 2.0):
        parts = split_mode(assemble_wave_operator(L, grid, r), psi, [0.0, 1.0, 7.0], 1.0)
        total = sum(parts[k].coefficients for k in ("LongFluid", "LongNonFluid", "Short"))
        assert np.allclose(total, parts["Full"].coefficients, atol=1e-10)


def test_fluid_datum_is_mostly_fluid(setup):
    grid, L = setup
    parts = split_mode(assemble_wave_operator(L, grid, 0.05), fluid_datum(grid), [30.0], 1.0)
    nf = parts["LongNonFluid"].coefficients[0]
    fl = parts["LongFluid"].coefficients[0]
    assert np.linalg.norm(nf) < 1e-6 * np.linalg.norm(fl)


def test_sweep_initial_norm(setup):
    grid, L = setup
    psi = fluid_datum(grid)
    sw = solve_sweep(L, grid, psi, [0.0, 1.0], 1.0, parts=("Full",))
    expected = SpaceProfile().L2 * np.sqrt(inner(psi, psi).real)
    assert sw.l2l2("Full")[0] == pytest.approx(expected, rel=1e-8)


def test_lobe_detection():
    x = np.linspace(0, 30, 3001)
    prof = np.abs((x - 20) * np.exp(-(x - 20) ** 2 / 4))
    assert outer_peak(x, prof) == pytest.approx(20 + np.sqrt(2), abs=1e-3)
    assert pulse_center(x, prof) == pytest.approx(20.0, abs=1e-3)
    assert len(lobe_peaks(x, prof)) == 2
