import json

import numpy as np
import pytest
from scipy import integrate

from conftest import midpoint, random_coeffs
from wavelearn import sinc_filter as sf
from wavelearn.sinc_filter import FilterParams


def unit(S, s=0):
    v = np.zeros(2 * S + 1, dtype=complex)
    v[S + s] = 1.0
    return v


# -- normalization and evaluation ----------------------------------------------------
def test_norm_const_unit_vector_and_scaling(rng):
    assert sf.tx_norm_const(unit(3), 8.0) == pytest.approx(8.0)
    th = random_coeffs(rng, 4)
    assert sf.tx_norm_const(2 * th, 8.0) == pytest.approx(sf.tx_norm_const(th, 8.0) / 4)
    with pytest.raises(ValueError):
        sf.tx_norm_const(np.zeros(5), 8.0)


def test_tx_filter_has_unit_energy_riemann(rng):
    D = 8.0
    p = FilterParams(random_coeffs(rng, 4), D, "tx")
    e = midpoint(lambda t: np.abs(sf.eval_filter_time(p, t)) ** 2, -D / 2, D / 2, 10**6)
    assert e == pytest.approx(1.0, abs=1e-6)


def test_time_response_support_and_constant_filter(rng):
    p = FilterParams(random_coeffs(rng, 3), 8.0, "rx")
    assert sf.eval_filter_time(p, 0.6 * 8.0) == 0
    assert sf.eval_filter_time(p, -0.6 * 8.0) == 0
    q = FilterParams(unit(3), 8.0, "tx")
    assert sf.eval_filter_time(q, 0.0) == pytest.approx(1 / np.sqrt(8))


def _inverse_ft_of_sinc(tau):
    """int sinc(x) exp(j 2 pi x tau) dx, by quadrature (QAWF on the tail)."""
    total = 0.0
    for w in (np.pi * (1 + 2 * tau), np.pi * (1 - 2 * tau)):
        if w == 0:
            continue
        head, _ = integrate.quad(lambda x: np.sin(w * x) / (np.pi * x) if x else w / np.pi, 0, 1,
                                 epsabs=1e-13, epsrel=1e-13)
        tail, _ = integrate.quad(lambda x: 1 / (np.pi * x), 1, np.inf, weight="sin", wvar=w)
        total += head + tail
    return total


def test_time_response_matches_inverse_fourier_quadrature(rng):
    D, S = 8.0, 3
    p = FilterParams(random_coeffs(rng, S), D, "rx")
    ts = np.array([-3.7, -2.1, -0.4, 0.0, 0.9, 2.5, 3.3, 4.6, -5.2])
    got = sf.eval_filter_time(p, ts)
    for t, g in zip(ts, got):
        # int sinc(Df - s) e^{j2pi f t} df = (1/D) e^{j2pi s t/D} int sinc(x) e^{j2pi x t/D} dx
        core = _inverse_ft_of_sinc(t / D) / D
        ref = sum(c * np.exp(2j * np.pi * s * t / D) * core for s, c in zip(p.indices, p.coeffs))
        assert abs(g - ref) <= 1e-8


def test_freq_response_simple_values():
    p = FilterParams(unit(3), 8.0, "tx")
    assert sf.eval_filter_freq(p, 0.0) == pytest.approx(np.sqrt(8))
    for k in (1, 2, -3, 7):
        assert abs(sf.eval_filter_freq(p, k / 8.0)) <= 1e-15


def test_freq_response_parseval(rng):
    D, S = 8.0, 4
    th = random_coeffs(rng, S)
    C = sf.tx_norm_const(th, D)
    X = 2000.0
    s = np.arange(-S, S + 1)
    total = 0.0
    for lo in np.arange(-X, X, 250.0):
        x = lo + (np.arange(250_000) + 0.5) * 1e-3
        total += np.sum(np.abs(np.sinc(x[:, None] - s) @ th) ** 2) * 1e-3
    sigma = np.sum((-1.0) ** s * th)
    total += abs(sigma) ** 2 / (np.pi**2 * X)  # both asymptotic sin^2/x^2 tails
    assert C / D * total == pytest.approx(1.0, abs=1e-6)
    # and the implementation evaluates the same response
    p = FilterParams(th, D, "tx")
    f = np.linspace(-3, 3, 11)
    np.testing.assert_allclose(sf.eval_filter_freq(p, f), np.sqrt(C) * np.sinc(D * f[:, None] - s) @ th)


# -- Gram matrices A(t) and A'(t) -----------------------------------------------------
@pytest.mark.parametrize("build", [sf.build_gram_A, sf.build_gram_Aprime])
def test_gram_identity_at_zero_and_zero_outside(build):
    np.testing.assert_array_equal(build(0.0, 4, 8.0).entries, np.eye(9))
    for t in (8.0, -8.0, 9.5):
        assert not np.any(build(t, 4, 8.0).entries)


def _basis(s, z, D):
    return np.where(np.abs(z) < D / 2, np.exp(2j * np.pi * s * z / D), 0.0)


@pytest.mark.parametrize("frac", [0.3, -0.3, 0.77])
def test_gram_A_matches_overlap_integral(frac):
    S, D = 3, 8.0
    t = frac * D
    a = sf.build_gram_A(t, S, D).entries
    lo, hi = max(-D / 2, t - D / 2), min(D / 2, t + D / 2)
    for i, s1 in enumerate(range(-S, S + 1)):
        for j, s2 in enumerate(range(-S, S + 1)):
            ref = midpoint(lambda z: _basis(s1, z, D) * _basis(s2, t - z, D), lo, hi, 10**5) / D
            assert abs(a[i, j] - ref) <= 1e-8


@pytest.mark.parametrize("frac", [0.3, -0.45])
def test_gram_Aprime_matches_overlap_integral(frac):
    S, D = 3, 8.0
    t = frac * D
    a = sf.build_gram_Aprime(t, S, D).entries
    lo, hi = max(-D / 2, t - D / 2), min(D / 2, t + D / 2)
    for i, s1 in enumerate(range(-S, S + 1)):
        for j, s2 in enumerate(range(-S, S + 1)):
            ref = midpoint(lambda z: _basis(s1, z, D) * np.conj(_basis(s2, z - t, D)), lo, hi, 10**5) / D
            assert abs(a[i, j] - ref) <= 1e-8


# -- effective channel ---------------------------------------------------------------
def _direct_alpha(theta, psi, t, D, n=200_000):
    tx = FilterParams(theta, D, "tx")
    rx = FilterParams(psi, D, "rx")
    lo, hi = max(-D / 2, t - D / 2), min(D / 2, t + D / 2)
    if hi <= lo:
        return 0.0
    return midpoint(lambda z: sf.eval_filter_time(tx, z) * sf.eval_filter_time(rx, t - z), lo, hi, n)


def test_alpha_simple_values():
    assert sf.effective_channel_alpha(unit(2), unit(2), 0.0, 8.0) == pytest.approx(1 / np.sqrt(8))
    assert sf.effective_channel_alpha(unit(2), unit(2), 1.5 * 8.0, 8.0) == 0


def test_alpha_matches_direct_convolution_100_draws(rng):
    D = 8.0
    for _ in range(100):
        S = int(rng.integers(1, 6))
        th, ps = random_coeffs(rng, S), random_coeffs(rng, S)
        t = rng.uniform(-1.1 * D, 1.1 * D)
        got = sf.effective_channel_alpha(th, ps, t, D)
        assert abs(got - _direct_alpha(th, ps, t, D, n=20_000)) <= 1e-7


# -- noise correlation -----------------------------------------------------------------
def test_noise_covariance_lag_zero_and_support(rng):
    ps = random_coeffs(rng, 4)
    D, N0 = 8.0, 0.3
    assert sf.noise_covariance(ps, 0.0, N0, D) == pytest.approx(N0 * np.vdot(ps, ps).real / D)
    assert sf.noise_covariance(ps, 8.0, N0, D) == 0
    assert sf.noise_covariance(ps, -9.0, N0, D) == 0
    for lag in (1.0, 2.5, 7.0):
        assert sf.noise_covariance(ps, -lag, N0, D) == pytest.approx(np.conj(sf.noise_covariance(ps, lag, N0, D)))


def test_noise_covariance_matches_correlation_integral(rng):
    ps = random_coeffs(rng, 4)
    D, N0 = 8.0, 0.7
    rx = FilterParams(ps, D, "rx")
    for lag in (1.0, -2.0, 3.0):
        lo, hi = max(-D / 2, -D / 2 - lag), min(D / 2, D / 2 - lag)
        ref = N0 * midpoint(lambda v: sf.eval_filter_time(rx, v) * np.conj(sf.eval_filter_time(rx, v + lag)),
                            lo, hi, 10**5)
        assert abs(sf.noise_covariance(ps, lag, N0, D) - ref) <= 1e-8


def test_noise_covariance_monte_carlo_filtered_white_noise():
    """n_m = int w(z) g_rx(mT - z) dz simulated on a fine grid; compare E[n_0 n_1^*]."""
    rng = np.random.default_rng(99)
    T, D, N0 = 1.0, 4.0, 1.0
    ps = random_coeffs(rng, 3)
    rx = FilterParams(ps, D, "rx")
    h = T / 64
    z = -D / 2 + (np.arange(int((D + T) / h)) + 0.5) * h  # covers supports of both taps
    k0 = sf.eval_filter_time(rx, 0 * T - z) * np.sqrt(h)
    k1 = sf.eval_filter_time(rx, 1 * T - z) * np.sqrt(h)
    kern = np.stack([k0, k1], axis=1)
    prods = []
    for _ in range(20):
        w = (rng.normal(size=(50_000, z.size)) + 1j * rng.normal(size=(50_000, z.size))) * np.sqrt(N0 / 2)
        n = w @ kern
        prods.append(n[:, 0] * np.conj(n[:, 1]))
    prods = np.concatenate(prods)
    est = prods.mean()
    se = np.sqrt(np.var(prods.real) / prods.size + np.var(prods.imag) / prods.size)
    want = sf.noise_covariance(ps, T, N0, D)
    assert abs(est - want) <= 3 * se
    # the opposite orientation would be distinguishable at this sample size
    assert abs(est - np.conj(want)) > 3 * se or abs(want.imag) < 3 * se


# -- in-band energy matrix -------------------------------------------------------------
def test_E_symmetric_psd_and_wideband_limit():
    E = sf.build_E(4, 32.0).entries
    np.testing.assert_array_equal(E, E.T)
    assert np.linalg.eigvalsh(E).min() >= -1e-12
    D = 4.0
    wide = sf.build_E(2, D, sf.BandSpec(symbol_period_T=D / 1e6), cache=False).entries
    assert np.max(np.abs(wide - np.eye(5) / D)) <= 1e-4


def test_E_closed_form_agrees_with_adaptive_quadrature():
    for S, D in ((4, 32.0), (6, 16.0)):
        closed = sf.build_E(S, D, cache=False).entries
        quad = sf.build_E(S, D, cache=False, method="quad").entries
        assert np.max(np.abs(closed - quad)) * D <= 1e-11


def test_E_matches_high_resolution_riemann_sum():
    S, D = 4, 32.0
    E = sf.build_E(S, D).entries
    s = np.arange(-S, S + 1)
    n, a, b = 10**7, -0.5, 0.5
    h = (b - a) / n
    acc = np.zeros((2 * S + 1, 2 * S + 1))
    for start in range(0, n, 10**6):
        f = a + (np.arange(start, start + 10**6) + 0.5) * h
        basis = np.sinc(D * f[None, :] - s[:, None])
        acc += basis @ basis.T * h
    assert np.max(np.abs(E - acc)) <= 1e-9


def test_E_disk_cache_roundtrip(tmp_path, monkeypatch):
    monkeypatch.setenv("WAVELEARN_CACHE", str(tmp_path))
    sf._E_CACHE.clear()
    first = sf.build_E(3, 16.0).entries
    files = list(tmp_path.glob("E_*.json"))
    assert len(files) == 1
    doc = json.loads(files[0].read_text())
    assert doc["header"]["S"] == 3 and doc["header"]["tolerance"] == sf.E_QUAD_TOL
    assert len(doc["values"]) == 49
    sf._E_CACHE.clear()
    np.testing.assert_array_equal(sf.build_E(3, 16.0).entries, first)


# -- ACLR ----------------------------------------------------------------------------
def test_aclr_synthetic_values():
    assert sf.aclr_from_in_band(1.0) == 0.0
    assert sf.aclr_from_in_band(0.5) == pytest.approx(1.0)


def test_aclr_matches_spectral_integration(rng):
    S, D = 8, 32.0
    th = random_coeffs(rng, S)
    E = sf.build_E(S, D)
    p = FilterParams(th, D, "tx")
    inside = midpoint(lambda f: np.abs(sf.eval_filter_freq(p, f)) ** 2, -0.5, 0.5, 10**6)
    total = midpoint(lambda t: np.abs(sf.eval_filter_time(p, t)) ** 2, -D / 2, D / 2, 10**5)
    ref = (total - inside) / inside
    assert sf.aclr(th, E, D) == pytest.approx(ref, rel=1e-6)
    assert 0 < sf.in_band_energy(th, E, D) <= 1


def test_aclr_scale_invariant(rng):
    S, D = 5, 16.0
    th = random_coeffs(rng, S)
    E = sf.build_E(S, D)
    base = sf.aclr(th, E, D)
    for c in (3.0, -0.2, 1 + 2j, 1e-3j):
        assert sf.aclr(c * th, E, D) == pytest.approx(base, rel=1e-12)
