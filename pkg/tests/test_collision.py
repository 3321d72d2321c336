import numpy as np
import pytest

from bgboltz.collision import (CollisionModel, assemble_operators, assemble_T,
                               background_invariants, gamma_bilinear, maxwellian_difference,
                               nu_values, project_P0, projector_P0)
from bgboltz.grid import GridFunction, build_grid, chi_basis, inner
from bgboltz.maxwell import A, BackgroundPair, MaxwellianParams, sqrt_ratio


@pytest.fixture(scope="module")
def grid():
    return build_grid(12, 8, 8.0)


@pytest.fixture(scope="module")
def ops(grid):
    return assemble_operators(CollisionModel(), grid, (0, 1))


def test_operator_is_symmetric_in_grid_inner_product(grid, ops):
    for m in (0, 1):
        S = grid.weights[:, None] * ops[m]["L"].entries
        assert np.linalg.norm(S - S.T) <= 1e-12 * np.linalg.norm(S)


def test_invariants_span_null_space(grid, ops):
    for m in (0, 1):
        gm = grid.with_sector(m)
        L = ops[m]["L"].entries
        for e in chi_basis(gm, m).values():
            assert np.linalg.norm(L @ e.values) < 1e-10
        ev = np.sort(np.abs(np.linalg.eigvals(L)))
        assert ev[len(chi_basis(gm, m))] > 0.5


def test_operator_is_dissipative(grid, ops):
    rng = np.random.default_rng(0)
    for m in (0, 1):
        gm = grid.with_sector(m)
        g = GridFunction(gm, rng.normal(size=gm.size), m)
        assert inner(g, ops[m]["L"] @ g).real < 0


def test_hard_sphere_like_frequency_grows():
    model = CollisionModel(gamma=1.0)
    pts = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 3.0], [0.0, 0.0, 6.0]])
    nu = nu_values(model, pts)
    assert nu[0] < nu[1] < nu[2]
    assert np.ptp(nu_values(CollisionModel(), pts)) < 1e-12


def test_projector_is_idempotent(grid):
    P = projector_P0(grid, 0)
    assert np.allclose(P @ P, P, atol=1e-12)
    assert np.linalg.matrix_rank(P, tol=1e-8) == 3


def test_source_has_no_invariant_component(grid):
    pair = BackgroundPair(MaxwellianParams(1.01, 0.02, 1.02))
    for m in (0, 1):
        gm = grid.with_sector(m)
        T = assemble_T(pair, gm, sector=m, model=CollisionModel()).entries
        P = projector_P0(gm, m)
        assert np.linalg.norm(P @ T) <= 1e-10 * max(np.linalg.norm(T), 1e-300)


def test_source_vanishes_for_identical_backgrounds(grid):
    T = assemble_T(BackgroundPair(A), grid, sector=0, model=CollisionModel()).entries
    assert not np.any(T)


@pytest.fixture(scope="module")
def small():
    return build_grid(10, 6, 8.0)


def _profile(grid, k):
    return GridFunction(grid, (grid.s ** 4 - 2 * grid.s ** 2 + k * grid.c) * np.exp(-grid.s ** 2 / 4), 0)


def test_bilinear_form_reproduces_linearized_operator(small):
    ops = assemble_operators(CollisionModel(), small, (0,))
    h = _profile(small, 0.0)
    sm = GridFunction(small, (2 * np.pi) ** -0.75 * np.exp(-small.s ** 2 / 4), 0)
    Lh = ops[0]["L"] @ h
    d = Lh - gamma_bilinear(CollisionModel(), small, sm, h) * 2.0
    assert np.sqrt(inner(d, d).real) < 0.01 * np.sqrt(inner(Lh, Lh).real)


def test_bilinear_form_agrees_with_source_matrix(small):
    b = MaxwellianParams(1.0, 0.0, 1.02)
    T = assemble_T(BackgroundPair(b), small, sector=0, model=CollisionModel()).entries
    h = _profile(small, 0.0)
    R = sqrt_ratio(b, small.cartesian())
    direct = gamma_bilinear(CollisionModel(), small, GridFunction(small, R * h.values, 0),
                            maxwellian_difference(small, b))
    Th = GridFunction(small, T @ h.values, 0)
    diff = direct - Th
    assert np.sqrt(inner(diff, diff).real) < 0.01 * np.sqrt(inner(Th, Th).real)


def test_bilinear_form_is_orthogonal_to_invariants(small):
    h1, h2 = _profile(small, 0.3), _profile(small, -1.0)
    g = gamma_bilinear(CollisionModel(), small, h1, h2, conservative=False)
    scale = np.sqrt(inner(g, g).real)
    for e in chi_basis(small, 0).values():
        assert abs(inner(e, g)) < 1e-3 * scale
    gc = gamma_bilinear(CollisionModel(), small, h1, h2)
    for e in chi_basis(small, 0).values():
        assert abs(inner(e, gc)) < 1e-6 * scale
    zero = gamma_bilinear(CollisionModel(), small, h1 * 0.0, h2)
    assert np.allclose(zero.values, 0.0)
