import numpy as np
import pytest

from bgboltz import heat_toy as heat
from bgboltz.grid import ConfigError


@pytest.fixture
def params():
    return heat.HeatParams(mu=0.05, lam=1.4)


def test_kappa():
    assert heat.HeatParams(lam=1.44, gamma=0.0).kappa == pytest.approx(1.44)
    assert heat.HeatParams(lam=1.44, gamma=1.0).kappa == pytest.approx(1.2)


def test_parameter_box():
    with pytest.raises(ConfigError):
        heat.HeatParams(lam=0.9)
    with pytest.raises(ConfigError):
        heat.HeatParams(gamma=1.5)


@pytest.mark.parametrize("which", ["a", "b"])
def test_closed_form_matches_quadrature(params, which):
    h0 = heat.GaussianDatum()
    for t in (0.5, 20.0):
        x = np.array([0.3, -0.2, 1.5])
        q = heat.convolution_by_quadrature(params, h0, which, t, x)
        assert q == pytest.approx(float(heat.solution(params, h0, which, t, x)), abs=1e-12)


def test_duhamel_halves_sum_to_difference(params):
    h0 = heat.GaussianDatum()
    for t in (2.0, 10.0):
        x = np.array([0.1, 0.4, 0.9])
        h1, h2 = heat.duhamel_route(params, h0, t, x)
        assert h1 + h2 == pytest.approx(heat.closed_difference(params, h0, t, x), rel=1e-9)


def test_l2_closed_form_matches_quadrature(params):
    pair = heat.solution_difference(params, heat.GaussianDatum(), 5.0)
    assert pair.l2() ** 2 == pytest.approx(pair.lp_quadrature(2), rel=1e-7)


def test_identical_flows_have_zero_difference():
    p = heat.HeatParams()
    assert heat.difference_norms(p, heat.GaussianDatum(), 3.0)["L2"] == pytest.approx(0.0, abs=1e-14)


def test_drift_and_temperature_slopes():
    table = heat.rate_table(window=(10.0, 1e3))
    for key, item in table.items():
        assert item["fit"].exponent == pytest.approx(item["predicted"], abs=0.07), key
