from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import expm
from scipy.special import lpmv, roots_legendre

from bgboltz import chi_experiment as chi
from bgboltz.collision import CollisionModel
from bgboltz.grid import ConfigError, inner
from bgboltz.maxwell import A, BackgroundPair, MaxwellianParams

SMALL = chi.ChiConfig(b=MaxwellianParams(1.01, 0.05, 1.02), n_speed=8, n_cosine=4,
                      max_sector=2, n_theta=6,
                      panels=((0.0, 0.4, 0.1, 4), (0.4, 2.0, 0.4, 4)), t_max=30.0,
                      per_decade=4, window=(3.0, 30.0), decomposition_time=10.0)


@pytest.fixture(scope="module")
def ops():
    return chi.sector_operators(SMALL.pair, SMALL.model, SMALL.grid(), SMALL.max_sector)


def test_pair_integral_matches_quadrature():
    for lam, mu in ((-0.3 + 1j, -0.1 - 0.5j), (-2.0, -2.0 + 1e-9), (-0.01, -3.0)):
        for t, a, b in ((5.0, 0.0, 5.0), (5.0, 1.0, 2.5)):
            f = lambda s, part: getattr(np.exp(lam * (t - s) + mu * s), part)
            ref = quad(f, a, b, args=("real",))[0] + 1j * quad(f, a, b, args=("imag",))[0]
            assert complex(chi.pair_integral(lam, mu, t, a, b)) == pytest.approx(ref, rel=1e-9)


def test_mode_solution_matches_block_exponential(ops):
    grid = SMALL.grid()
    M = SMALL.max_sector
    r, th = 0.4, 1.1
    Aa = chi.coupled_matrix(ops.La, grid, r, th, M)
    Ab = chi.coupled_matrix(ops.Lb, grid, r, th, M)
    T2 = 2 * chi.block_diag(ops.T, M)
    v = chi.chi11_mode(SMALL, r, th, [0.0, 2.0, 9.0], ops=ops)
    n = Aa.shape[0]
    big = np.zeros((2 * n, 2 * n), dtype=complex)
    big[:n, :n], big[:n, n:], big[n:, n:] = Aa, T2, Ab
    psi = np.zeros(n, dtype=complex)
    psi[:grid.size] = chi.derive_f0b(SMALL.pair, chi.initial_profile_a(grid)).values
    for k, t in enumerate([0.0, 2.0, 9.0]):
        ref = (expm(big * t)[:n, n:] @ psi)
        assert np.linalg.norm(v[k] - ref) <= 1e-9 * max(np.linalg.norm(ref), 1e-300)


def test_parts_sum_to_mode_solution(ops):
    grid = SMALL.grid()
    M = SMALL.max_sector
    psi = np.zeros((M + 1) * grid.size, dtype=complex)
    psi[:grid.size] = chi.derive_f0b(SMALL.pair, chi.initial_profile_a(grid)).values
    dm = chi.duhamel_mode(chi.coupled_matrix(ops.La, grid, 0.3, 0.5, M),
                          chi.coupled_matrix(ops.Lb, grid, 0.3, 0.5, M),
                          2 * chi.block_diag(ops.T, M), psi)
    n = len(dm.lam)
    t = 6.0
    total = dm.part(t, np.arange(n), np.arange(n), (0.0, t))
    split = sum(dm.part(t, ia, ib, iv)
                for ia in (dm.slow_a, np.setdiff1d(np.arange(n), dm.slow_a))
                for ib in (dm.slow_b, np.setdiff1d(np.arange(n), dm.slow_b))
                for iv in ((0.0, t / 2), (t / 2, t)))
    assert np.allclose(split, total, atol=1e-12 * np.linalg.norm(total))
    assert np.allclose(dm.solve([t])[0], total, atol=1e-10 * np.linalg.norm(total))


def test_transport_coupling_is_skew_in_weighted_norm():
    grid = SMALL.grid()
    M = 3
    zero = {m: np.zeros((grid.size, grid.size)) for m in range(M + 1)}
    X = chi.coupled_matrix(zero, grid, 1.0, 0.8, M)
    az = np.repeat([2 * np.pi] + [np.pi] * M, grid.size) * np.tile(grid.weights, M + 1)
    S = az[:, None] * X
    assert np.allclose(S, -S.conj().T, atol=1e-13)


def test_legendre_projection_is_exact():
    c, _ = roots_legendre(8)
    for m in range(4):
        g = (1 - c * c) ** (m / 2) * (1 + c ** 3 - c ** 7)
        a = chi.legendre_projection(c, m, 8) @ g
        x = np.array([-0.7, 0.1, 0.95])
        rec = sum(a[k] * lpmv(m, m + k, x) for k in range(8))
        assert np.allclose(rec, (1 - x * x) ** (m / 2) * (1 + x ** 3 - x ** 7), atol=1e-12)


def test_wavevector_diagonal_structure_on_periodic_toy():
    """Per-mode Duhamel integrals reproduce a direct space-velocity solve."""
    rng = np.random.default_rng(3)
    nv, nx = 3, 7  # odd, so no unpaired Nyquist mode
    V = np.diag([-1.0, 0.3, 1.2])
    def dissipative():
        B = rng.normal(size=(nv, nv))
        return -(B @ B.T) - 0.1 * np.eye(nv)
    La, Lb, T = dissipative(), dissipative(), rng.normal(size=(nv, nv))
    eta = 2 * np.pi * np.fft.fftfreq(nx, d=1.0 / nx) / nx
    F = np.fft.fft(np.eye(nx), axis=0)
    Finv = np.linalg.inv(F)
    D = (Finv @ np.diag(1j * eta) @ F).real
    Ga = -np.kron(D, V) + np.kron(np.eye(nx), La)
    Gb = -np.kron(D, V) + np.kron(np.eye(nx), Lb)
    n = nx * nv
    big = np.zeros((2 * n, 2 * n))
    big[:n, :n], big[:n, n:], big[n:, n:] = Ga, np.kron(np.eye(nx), 2 * T), Gb
    f0 = rng.normal(size=(nx, nv))
    t = 1.7
    direct = (expm(big * t)[:n, n:] @ f0.ravel()).reshape(nx, nv)
    f0_hat = np.fft.fft(f0, axis=0)
    out_hat = np.zeros_like(f0_hat)
    for k in range(nx):
        dm = chi.duhamel_mode(-1j * eta[k] * V + La, -1j * eta[k] * V + Lb, 2 * T, f0_hat[k])
        out_hat[k] = dm.solve([t])[0]
    assert np.allclose(np.fft.ifft(out_hat, axis=0).real, direct, atol=1e-10)


def test_identical_backgrounds_give_zero_source():
    cfg = replace(SMALL, b=A, strict=False)
    ops = chi.sector_operators(cfg.pair, cfg.model, cfg.grid(), cfg.max_sector)
    assert all(not np.any(T) for T in ops.T.values())


def test_shifted_datum_relation():
    grid = SMALL.grid()
    f0a = chi.initial_profile_a(grid)
    f0b = chi.derive_f0b(SMALL.pair, f0a)
    from bgboltz.maxwell import sqrt_ratio
    assert np.allclose(f0b.values * sqrt_ratio(SMALL.b, grid.cartesian()), f0a.values)


def test_exchange_defect_is_first_order():
    d1 = chi.exchange_defect(SMALL, r_values=(0.2,), times=(3.0,))
    d2 = chi.exchange_defect(replace(SMALL, b=SMALL.b.scaled(0.5)), r_values=(0.2,),
                             times=(3.0,))
    assert d2 / d1 == pytest.approx(0.5, abs=0.1)


def test_scaling_cross_check_passes_and_fails_loudly():
    grid = SMALL.grid()
    pair = BackgroundPair(MaxwellianParams(1.0, 0.0, 1.3))
    assert chi.scaling_cross_check(pair, CollisionModel(), grid) < 1e-8
    with pytest.raises(chi.CrossCheckError):
        chi.scaling_cross_check(pair, CollisionModel(), grid, tol=0.0)


def test_small_sweep_norms_and_decomposition(ops):
    sw = chi.run_sweep(SMALL, ops=ops)
    n = sw.norms()
    assert n["L2"][0] == 0.0 and np.all(n["L2"][1:] > 0)
    assert np.all(np.isfinite(n["Linf"]))
    rep = chi.decomposition_report(sw)
    assert rep["sum_residual"] < 1e-8


def test_config_validation():
    with pytest.raises(ConfigError):
        chi.ChiConfig(beta=1.0)
    with pytest.raises(ConfigError):
        chi.ChiConfig(b=MaxwellianParams(1.0, (0.1, 0.0, 0.0), 1.1))
