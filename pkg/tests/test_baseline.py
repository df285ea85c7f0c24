import numpy as np
import pytest
from scipy import integrate

from wavelearn import baseline as bl
from wavelearn import channel as chn
from wavelearn import constellation as cst

QAM16 = cst.gray_qam(4)
QPSK = cst.gray_qam(2)


# -- pulses ---------------------------------------------------------------------------------
def test_rrc_beta_zero_is_sinc():
    t = np.linspace(-5, 5, 101)
    np.testing.assert_allclose(bl.rrc_time(t, 0.0), np.sinc(t), atol=1e-15)
    np.testing.assert_allclose(bl.rrc_time(2 * t, 0.0, T=2.0), np.sinc(t) / np.sqrt(2), atol=1e-15)


def _extrapolate(f, x0, h=1e-6):
    """Richardson/quadratic extrapolation of ``f(x0)`` from symmetric samples."""
    avg = lambda d: 0.5 * (f(x0 + d) + f(x0 - d))  # noqa: E731
    return (4 * avg(h) - avg(2 * h)) / 3


@pytest.mark.parametrize("beta", [0.25, 0.5, 0.9])
def test_rrc_removable_singularities(beta):
    f = lambda x: float(bl.rrc_time(np.array([x]), beta)[0])  # noqa: E731
    assert f(0.0) == pytest.approx(_extrapolate(f, 0.0), abs=1e-8)
    x0 = 1 / (4 * beta)
    assert f(x0) == pytest.approx(_extrapolate(f, x0), abs=1e-8)
    assert f(-x0) == pytest.approx(f(x0), abs=1e-15)


@pytest.mark.parametrize("beta", [0.25, 0.5])
def test_rrc_unit_energy(beta):
    n = 128 * 256
    t = -64 + (np.arange(n) + 0.5) * 128 / n
    assert np.sum(bl.rrc_time(t, beta) ** 2) * 128 / n == pytest.approx(1.0, abs=1e-4)


def test_blackman_examples():
    assert bl.blackman(0.0) == pytest.approx(1.0)
    assert bl.blackman(0.4999999999) == pytest.approx(0.0, abs=1e-12)
    assert bl.blackman(0.5) == 0.0 and bl.blackman(-0.7) == 0.0
    u = np.linspace(-0.6, 0.6, 121)
    np.testing.assert_allclose(bl.blackman(u), bl.blackman(-u), atol=1e-15)


def test_baseline_filter_forms():
    t = np.linspace(-20, 20, 401)
    raw = bl.RrcSpec(0.3, 32.0, windowed=False)
    np.testing.assert_array_equal(bl.baseline_filter(raw, t), bl.rrc_time(t, 0.3))
    win = bl.RrcSpec(0.3, 32.0)
    g = bl.baseline_filter(win, t)
    assert np.all(g[np.abs(t) >= 16] == 0)
    energy, _ = integrate.quad(lambda x: float(bl.baseline_filter(win, x)) ** 2, -16, 16, limit=400)
    assert energy == pytest.approx(1.0, abs=1e-9)


def test_spec_validation():
    with pytest.raises(ValueError):
        bl.RrcSpec(1.0)
    with pytest.raises(ValueError):
        bl.RrcSpec(0.2, -1.0)


# -- link quantities --------------------------------------------------------------------------
@pytest.mark.parametrize("beta,D", [(0.0, 1024.0), (0.3, 64.0), (0.5, 32.0)])
def test_unwindowed_pair_is_nyquist(beta, D):
    q = bl.baseline_link_quantities(bl.RrcSpec(beta, D, windowed=False))
    L = (q.taps.size + 1) // 2
    assert np.max(np.abs(q.taps[L : L + 8])) <= 1e-3
    assert np.max(np.abs(q.taps[L - 9 : L - 1])) <= 1e-3
    assert q.taps[L - 1].real == pytest.approx(1.0, abs=1e-3)


def test_windowing_breaks_nyquist():
    q = bl.baseline_link_quantities(bl.RrcSpec(0.0, 32.0))
    L = (q.taps.size + 1) // 2
    assert np.abs(q.taps[L]) > 1e-3
    assert np.all(np.abs(q.taps[L - 1]) > np.abs(np.delete(q.taps, L - 1)))


def test_taps_match_direct_quadrature():
    spec = bl.RrcSpec(0.3, 8.0)
    q = bl.baseline_link_quantities(spec)
    L = (q.taps.size + 1) // 2
    for l in (0, 1, 3):
        val, _ = integrate.quad(
            lambda z: float(bl.baseline_filter(spec, z) * bl.baseline_filter(spec, l - z)),
            max(-4, l - 4), min(4, l + 4), limit=400,
        )
        assert q.taps[L - 1 + l].real == pytest.approx(val, abs=1e-6)


def test_noise_lags_symmetric_and_unit_at_zero():
    q = bl.baseline_link_quantities(bl.RrcSpec(0.2, 16.0), N0=0.25)
    np.testing.assert_allclose(q.noise_lags, q.noise_lags[::-1], atol=1e-15)
    assert q.noise_lags[(q.noise_lags.size - 1) // 2].real == pytest.approx(0.25, rel=1e-9)


def test_aclr_positive_and_increasing_in_beta():
    aclr = [bl.baseline_link_quantities(bl.RrcSpec(b, 32.0)).aclr for b in (0.0, 0.3, 0.5)]
    assert aclr[0] > 0
    assert aclr[0] < aclr[1] < aclr[2]


def test_aclr_matches_fft_integration():
    spec = bl.RrcSpec(0.3, 16.0)
    O = 64
    half = 8 * O
    t = np.arange(-half, half + 1) / O
    g = np.where(np.abs(t) < 8, bl.baseline_filter(spec, t), 0.0)
    nfft = 2**22
    f = np.fft.fftfreq(nfft, 1 / O)
    dens = np.abs(np.fft.fft(g, nfft)) ** 2
    inband = np.sum(dens[np.abs(f) < 0.5])
    expected = (np.sum(dens) - inband) / inband
    assert bl.baseline_link_quantities(spec).aclr == pytest.approx(expected, rel=1e-3)


def test_zero_noise_round_trip_with_nyquist_pair(rng):
    q = bl.baseline_link_quantities(bl.RrcSpec(0.5, 64.0, windowed=False), N0=0.0)
    ch = chn.DiscreteChannel(q.taps, np.zeros((64, 64), complex), 0.0)
    s = QAM16.points[rng.integers(0, 16, size=64)]
    assert np.max(np.abs(chn.transmit(s, ch, np.zeros(64)) - s)) <= 1e-3


# -- demapper ---------------------------------------------------------------------------------
def test_llr_bpsk():
    bpsk = cst.Constellation(np.array([1.0, -1.0]), 1)
    assert bl.awgn_llr(1.0, bpsk, 1.0)[0] == pytest.approx(4.0)
    assert bl.awgn_llr(0.7j, bpsk, 0.3)[0] == pytest.approx(0.0, abs=1e-12)


def _brute_llr(r, c, N0):
    pts = c.points.astype(np.clongdouble)
    p = np.exp(-np.abs(np.clongdouble(r) - pts) ** 2 / np.longdouble(N0))
    lab = c.labels
    return np.array([np.log(p[lab[:, k] == 0].sum()) - np.log(p[lab[:, k] == 1].sum()) for k in range(lab.shape[1])])


def test_llr_brute_force_16qam(rng):
    rs = 1.2 * (rng.normal(size=50) + 1j * rng.normal(size=50))
    got = bl.awgn_llr(rs, QAM16, 0.1)
    for r, row in zip(rs, got):
        want = _brute_llr(r, QAM16, 0.1).astype(np.float64)
        np.testing.assert_allclose(row, want, rtol=1e-9, atol=1e-12)


def test_llr_far_from_constellation_stays_finite():
    llr = bl.awgn_llr(40.0 + 40j, QAM16, 1e-3)
    assert np.all(np.isfinite(llr))


def test_llr_sign_flip_under_label_inversion(rng):
    flipped = cst.Constellation(QAM16.points[::-1], 4)  # index i -> i XOR 1111
    rs = rng.normal(size=20) + 1j * rng.normal(size=20)
    np.testing.assert_allclose(bl.awgn_llr(rs, flipped, 0.5), -bl.awgn_llr(rs, QAM16, 0.5), atol=1e-12)


# -- rate -------------------------------------------------------------------------------------
def _gauss_hermite_bicm(c, N0, n=48):
    """16QAM BICM rate on ideal AWGN by tensor Gauss-Hermite over the noise."""
    u, w = np.polynomial.hermite.hermgauss(n)
    noise = np.sqrt(N0) * (u[:, None] + 1j * u[None, :])
    weight = (w[:, None] * w[None, :]) / np.pi
    lab = c.labels
    total = 0.0
    for i, s in enumerate(c.points):
        r = s + noise
        metric = -np.abs(r[..., None] - c.points) ** 2 / N0
        for k in range(lab.shape[1]):
            num = np.logaddexp.reduce(metric[..., lab[:, k] == lab[i, k]], axis=-1)
            den = np.logaddexp.reduce(metric, axis=-1)
            total += np.sum(weight * (den - num)) / np.log(2)
    return c.bits_per_symbol_K - total / c.points.size


def test_rate_matches_gauss_hermite_oracle():
    N0 = 0.1
    oracle = _gauss_hermite_bicm(QAM16, N0)
    assert _gauss_hermite_bicm(QAM16, N0, n=64) == pytest.approx(oracle, abs=1e-6)
    est = bl.baseline_rate(None, QAM16, N0, num_blocks=400, rng=np.random.default_rng(1))
    assert est.rate == pytest.approx(oracle, abs=0.02)
    assert est.stderr < 0.01


def test_rate_limits():
    hi = bl.baseline_rate(bl.RrcSpec(0.0, 64.0, windowed=False), QAM16, 1e-4, num_blocks=50)
    assert hi.rate == pytest.approx(4.0, abs=0.01)
    lo = bl.baseline_rate(bl.RrcSpec(0.0, 16.0), QAM16, 1e3, num_blocks=50)
    assert lo.rate == pytest.approx(0.0, abs=0.05)


def test_rate_monotone_in_snr():
    spec = bl.RrcSpec(0.0, 16.0)
    rates = [
        bl.baseline_rate(spec, QPSK, 10 ** (-snr / 10), num_blocks=100, rng=np.random.default_rng(4)).rate
        for snr in (0.0, 5.0, 10.0, 15.0, 20.0)
    ]
    assert all(b >= a for a, b in zip(rates, rates[1:]))


def test_papr_is_scale_free_and_finite():
    spec = bl.RrcSpec(0.0, 16.0)
    p, t, x = bl.baseline_papr(spec, QAM16, n_symbols=2000)
    assert 3.0 < p < 12.0
    assert x.size == t.size
