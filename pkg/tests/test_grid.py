import numpy as np
import pytest

from bgboltz.grid import (ConfigError, GridFunction, build_grid, chi_basis, discrete_orthonormal,
                          inner, japanese, norm)


@pytest.fixture(scope="module")
def grid():
    return build_grid(12, 8, 8.0)


def test_maxwellian_moments_are_exact(grid):
    # int sqrt(M)^2 d xi = 1 and int |xi|^2 M d xi = 3
    sm2 = (2 * np.pi) ** -1.5 * np.exp(-grid.s ** 2 / 2)
    assert 2 * np.pi * np.sum(grid.weights * sm2) == pytest.approx(1.0, rel=1e-12)
    assert 2 * np.pi * np.sum(grid.weights * grid.s ** 2 * sm2) == pytest.approx(3.0, rel=1e-10)


def test_invariants_are_orthonormal(grid):
    b0 = list(chi_basis(grid, 0).values())
    gram = np.array([[inner(f, g).real for g in b0] for f in b0])
    assert np.allclose(gram, np.eye(3), atol=1e-10)
    g1 = grid.with_sector(1)
    c1 = chi_basis(g1, 1)["chi1"]
    assert inner(c1, c1).real == pytest.approx(1.0, rel=1e-10)


def test_gram_schmidt_drops_dependent_functions(grid):
    f = GridFunction(grid, np.exp(-grid.s ** 2 / 4), 0)
    basis = discrete_orthonormal([f, f * 2.0])
    assert len(basis) == 1
    assert norm(basis[0]) == pytest.approx(1.0)


def test_japanese_bracket():
    assert japanese(0.0) == pytest.approx(1.0)
    assert japanese(np.array([3.0]))[0] == pytest.approx(np.sqrt(10.0))


@pytest.mark.parametrize("args", [(3, 8), (12, 2), (12, 8, 4.0)])
def test_invalid_grids_rejected(args):
    with pytest.raises(ConfigError):
        build_grid(*args)


def test_grid_function_rejects_wrong_size(grid):
    with pytest.raises(ValueError):
        GridFunction(grid, np.zeros(grid.size + 1), 0)
