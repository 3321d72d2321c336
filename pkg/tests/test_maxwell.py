import numpy as np
import pytest

from bgboltz.grid import ConfigError, build_grid
from bgboltz.maxwell import (A, BackgroundPair, DomainError, MaxwellianParams, eval_maxwellian,
                             lemma_bound_ratio, macro_error, mean_value_difference, sqrt_ratio,
                             sqrt_ratio_direct)


def test_closed_form_ratio_matches_direct_quotient():
    b = MaxwellianParams(1.3, (0.2, -0.1, 0.4), 1.5)
    xi = np.random.default_rng(1).normal(size=(50, 3)) * 2
    assert np.allclose(sqrt_ratio(b, xi), sqrt_ratio_direct(b, xi), rtol=1e-12)


def test_ratio_requires_hotter_background_in_strict_mode():
    b = MaxwellianParams(1.0, 0.1, 1.0)
    with pytest.raises(DomainError):
        sqrt_ratio(b, np.zeros((1, 3)))
    assert sqrt_ratio(b, np.zeros((1, 3)), strict=False)[0] > 0


def test_scaled_parameters_and_discrepancy():
    b = MaxwellianParams(1.2, 0.3, 1.4)
    h = b.scaled(0.5)
    assert (h.rho, h.mu_axial, h.lam) == pytest.approx((1.1, 0.15, 1.2))
    assert macro_error(b) == pytest.approx(0.9)
    assert macro_error(h) == pytest.approx(0.45)


def test_identical_backgrounds_flagged():
    assert BackgroundPair(A).identical
    assert not BackgroundPair(MaxwellianParams(1.0, 0.0, 1.1)).identical


def test_invalid_parameters():
    with pytest.raises(ConfigError):
        MaxwellianParams(-1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        MaxwellianParams(1.0, 0.0, 2.5).check_admissible()


def test_mean_value_path_reproduces_difference():
    b = MaxwellianParams(1.1, (0.1, 0.0, -0.2), 1.3)
    for xi in (np.zeros(3), np.array([1.0, -2.0, 0.5])):
        direct = eval_maxwellian(b, xi) - eval_maxwellian(A, xi)
        assert mean_value_difference(b, xi) == pytest.approx(direct, abs=1e-12)


def test_bound_ratio_is_finite_and_stable():
    b = MaxwellianParams(1.01, 0.02, 1.01)
    r1 = lemma_bound_ratio(b, 4.0, build_grid(12, 8), 1.5)
    r2 = lemma_bound_ratio(b, 4.0, build_grid(24, 16), 1.5)
    assert np.isfinite(r1) and r1 > 0
    assert r2 / r1 == pytest.approx(1.0, abs=0.05)
    with pytest.raises(DomainError):
        lemma_bound_ratio(A, 4.0, build_grid(12, 8), 1.5)
