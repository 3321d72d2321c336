import numpy as np
import pytest

from bgboltz.collision import CollisionModel, assemble_operators
from bgboltz.grid import build_grid
from bgboltz.maxwell import BackgroundPair, MaxwellianParams
from bgboltz.spectrum import (assemble_wave_operator, choose_delta, dispersion_fits,
                              fit_dispersion, max_real_part, predicted_coefficients,
                              scaling_factor, spectral_gap, temperature_scaling_check)


@pytest.fixture(scope="module")
def setup():
    grid = build_grid(12, 8, 8.0)
    ops = assemble_operators(CollisionModel(), grid, (0, 1))
    return grid, {m: ops[m]["L"] for m in (0, 1)}


def test_wave_operator_reduces_to_collision_operator(setup):
    grid, Ls = setup
    w = assemble_wave_operator(Ls[0], grid, 0.0)
    assert np.allclose(w.entries, Ls[0].entries)
    with pytest.raises(ValueError):
        assemble_wave_operator(Ls[0], grid, -1.0)


def test_wave_operator_is_stable(setup):
    grid, Ls = setup
    for r in (0.1, 1.0, 4.0):
        assert max_real_part(assemble_wave_operator(Ls[0], grid, r)) < 1e-10


def test_gap_matches_maxwell_molecule_value(setup):
    _, Ls = setup
    assert spectral_gap(Ls) == pytest.approx(2 * np.pi / 3, rel=1e-3)


def test_cutoff_inside_scan(setup):
    grid, Ls = setup
    delta, gap = choose_delta(Ls, grid)
    assert 0 < delta <= 1.5 and gap > 0


def test_dispersion_fit_on_synthetic_branches():
    r = np.linspace(0.01, 0.15, 10)
    samples = [(x, {0: -0.4 * x * x - 1.2j * x, 1: -0.2 * x * x + 0j}) for x in r]
    fits = fit_dispersion(samples)
    assert fits[0].a_j == pytest.approx(1.2) and fits[0].A_j == pytest.approx(0.4)
    assert fits[1].a_j == pytest.approx(0.0, abs=1e-12) and fits[1].A_j == pytest.approx(0.2)
    with pytest.raises(ValueError):
        fit_dispersion(samples[:4])


def test_sound_speed(setup):
    grid, _ = setup
    fits, _ = dispersion_fits(CollisionModel(), grid)
    by = {f.branch_index: f for f in fits}
    assert by[0].a_j == pytest.approx(np.sqrt(5 / 3), rel=0.02)
    assert by[1].a_j == pytest.approx(-by[0].a_j, rel=1e-6)
    assert all(f.A_j > 0 for f in fits)


def test_scaling_prediction_on_adapted_grid():
    grid = build_grid(12, 8, 8.0)
    b = MaxwellianParams(1.1, 0.2, 1.3)
    out = temperature_scaling_check(BackgroundPair(b), grid=grid, adapted=True)
    # fitted coefficients carry the polynomial-fit error, not the operator error
    assert out["max_rel_err"] < 1e-4
    assert scaling_factor(b, 0.0) == pytest.approx(1.1)
