"""Power-law and exponential fits of decay series."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FitError(ValueError):
    pass


@dataclass
class DecayFit:
    exponent: float
    intercept: float
    window: tuple
    residual: float
    max_deviation: float

    def to_dict(self):
        return {"exponent": self.exponent, "intercept": self.intercept,
                "window": list(self.window), "residual": self.residual,
                "max_deviation": self.max_deviation}


def _window(t, y, window):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = window
    sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    if sel.sum() < 3:
        raise FitError("fewer than three samples in the fit window")
    if np.any(y[sel] <= 0):
        raise FitError("non-positive values inside the fit window")
    return t[sel], y[sel]


def fit_decay(t, y, window, min_decades=1.0):
    """Least-squares slope of ``log y`` against ``log(1 + t)``."""
    lo, hi = window
    if lo <= 0 or np.log10(hi / lo) < min_decades - 1e-9:
        raise FitError(f"window {window} shorter than {min_decades} decade(s)")
    ts, ys = _window(t, y, window)
    X = np.log1p(ts)
    Y = np.log(ys)
    M = np.stack([X, np.ones_like(X)], axis=1)
    coef, *_ = np.linalg.lstsq(M, Y, rcond=None)
    dev = Y - M @ coef
    return DecayFit(float(coef[0]), float(coef[1]), (float(lo), float(hi)),
                    float(np.sqrt(np.mean(dev ** 2))), float(np.max(np.abs(dev))))


@dataclass
class ExpFit:
    rate: float
    intercept: float
    residual: float
    power_residual: float

    @property
    def exponential(self):
        """True when ``log y`` is linear in ``t`` and clearly not a power law."""
        return self.rate > 0 and self.residual < self.power_residual

    def to_dict(self):
        return {"rate": self.rate, "intercept": self.intercept, "residual": self.residual,
                "power_residual": self.power_residual, "exponential": self.exponential}


def fit_exponential(t, y, window):
    """Fit ``log y = c - rate t`` and compare with the best power law."""
    ts, ys = _window(t, y, window)
    Y = np.log(ys)
    M = np.stack([-ts, np.ones_like(ts)], axis=1)
    coef, *_ = np.linalg.lstsq(M, Y, rcond=None)
    res = float(np.sqrt(np.mean((Y - M @ coef) ** 2)))
    P = np.stack([np.log1p(ts), np.ones_like(ts)], axis=1)
    cp, *_ = np.linalg.lstsq(P, Y, rcond=None)
    pres = float(np.sqrt(np.mean((Y - P @ cp) ** 2)))
    return ExpFit(float(coef[0]), float(coef[1]), res, pres)


def geometric_times(t0, t1, per_decade=12):
    n = int(np.ceil(per_decade * np.log10(t1 / t0))) + 1
    return np.geomspace(t0, t1, n)
