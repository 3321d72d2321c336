import numpy as np
import pytest

from bgboltz.fitting import FitError, fit_decay, fit_exponential, geometric_times


def test_power_law_slope_recovered():
    t = geometric_times(10, 1e4)
    f = fit_decay(t, 3.0 * (1 + t) ** -1.25, (10, 1e4))
    assert f.exponent == pytest.approx(-1.25, abs=1e-12)
    assert f.residual < 1e-12


def test_short_window_rejected():
    t = geometric_times(10, 1e3)
    with pytest.raises(FitError):
        fit_decay(t, 1 / t, (10, 50))


def test_nonpositive_values_rejected():
    t = geometric_times(10, 1e3)
    with pytest.raises(FitError):
        fit_decay(t, -1 / t, (10, 1e3))


def test_exponential_detected_and_power_law_rejected():
    t = np.linspace(1, 20, 40)
    e = fit_exponential(t, np.exp(-0.7 * t), (1, 20))
    assert e.exponential and e.rate == pytest.approx(0.7)
    p = fit_exponential(t, (1 + t) ** -2.0, (1, 20))
    assert not p.exponential
