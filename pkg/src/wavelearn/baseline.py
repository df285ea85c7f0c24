"""Benchmark link: Blackman-windowed root-raised-cosine filters with an AWGN demapper.

Everything here is computed numerically from densely sampled pulses
(oversampling ``O = 64`` by default) and is independent of the sinc-basis
machinery, so it can serve as an unbiased reference for learned systems.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import signal as sps
from scipy.special import logsumexp

from . import channel as chn
from . import envelope as env
from .constellation import Constellation

__all__ = [
    "RrcSpec",
    "rrc_time",
    "blackman",
    "baseline_filter",
    "LinkQuantities",
    "baseline_link_quantities",
    "awgn_llr",
    "bce_bits",
    "RateEstimate",
    "baseline_rate",
    "baseline_papr",
]

LINK_OVERSAMPLING = 64


@dataclass(frozen=True)
class RrcSpec:
    rolloff_beta: float = 0.0
    duration_D: float = 32.0
    symbol_period_T: float = 1.0
    windowed: bool = True

    def __post_init__(self):
        if not 0.0 <= self.rolloff_beta < 1.0:
            raise ValueError("rolloff_beta must lie in [0, 1)")
        if self.duration_D <= 0 or self.symbol_period_T <= 0:
            raise ValueError("durations must be positive")


def rrc_time(t, beta: float, T: float = 1.0) -> np.ndarray:
    """Unit-energy root-raised-cosine impulse response.

    The removable singularities at ``t = 0`` and ``|t| = T/(4 beta)`` are
    replaced by their limits.
    """
    x = np.asarray(t, dtype=np.float64) / T
    if beta == 0.0:
        return np.sinc(x) / np.sqrt(T)
    num = np.sin(np.pi * x * (1 - beta)) + 4 * beta * x * np.cos(np.pi * x * (1 + beta))
    den = np.pi * x * (1 - (4 * beta * x) ** 2)
    zero = x == 0
    pole = np.isclose(np.abs(x), 1 / (4 * beta), rtol=0, atol=1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / np.where(zero | pole, 1.0, den)
    out = np.where(zero, 1 - beta + 4 * beta / np.pi, out)
    q = np.pi / (4 * beta)
    edge = beta / np.sqrt(2) * ((1 + 2 / np.pi) * np.sin(q) + (1 - 2 / np.pi) * np.cos(q))
    out = np.where(pole, edge, out)
    return out / np.sqrt(T)


def blackman(u) -> np.ndarray:
    """``0.42 + 0.5 cos(2 pi u) + 0.08 cos(4 pi u)`` on ``(-1/2, 1/2)``, zero elsewhere."""
    u = np.asarray(u, dtype=np.float64)
    w = 0.42 + 0.5 * np.cos(2 * np.pi * u) + 0.08 * np.cos(4 * np.pi * u)
    return np.where(np.abs(u) < 0.5, w, 0.0)


@lru_cache(maxsize=64)
def _window_energy(beta: float, D: float, T: float) -> float:
    # the windowed pulse is smooth and vanishes with zero slope at +-D/2, so a fine
    # midpoint rule is accurate to well below 1e-10
    n = int(np.ceil(D / T)) * 512
    t = -D / 2 + (np.arange(n) + 0.5) * D / n
    g = rrc_time(t, beta, T) * blackman(t / D)
    return float(np.sum(g**2) * D / n)


def baseline_filter(spec: RrcSpec, t) -> np.ndarray:
    """Transmit (= receive) pulse.

    Windowed: ``rrc(t) w(t/D)`` rescaled to unit energy.  Unwindowed: the
    plain RRC, truncated to ``|t| < D/2`` when sampled for link quantities.
    """
    t = np.asarray(t, dtype=np.float64)
    g = rrc_time(t, spec.rolloff_beta, spec.symbol_period_T)
    if not spec.windowed:
        return g
    e = _window_energy(spec.rolloff_beta, spec.duration_D, spec.symbol_period_T)
    return g * blackman(t / spec.duration_D) / np.sqrt(e)


def _sampled(spec: RrcSpec, O: int) -> tuple[np.ndarray, float, int]:
    T = spec.symbol_period_T
    half = int(np.floor(spec.duration_D / 2 * O / T))
    k = np.arange(-half, half + 1)
    t = k * T / O
    g = np.where(np.abs(t) < spec.duration_D / 2, baseline_filter(spec, t), 0.0)
    return g, T / O, half


@dataclass(frozen=True)
class LinkQuantities:
    taps: np.ndarray  # alpha(lT), l = -(L-1)..L-1
    noise_lags: np.ndarray  # E[n_m n*_{m+l}], same lag range
    aclr: float
    N0: float = 1.0

    @property
    def aclr_db(self) -> float:
        return float(10 * np.log10(self.aclr))

    def channel(self, N: int) -> chn.DiscreteChannel:
        return chn.channel_from_lags(self.taps, self.noise_lags, N, self.N0)


@lru_cache(maxsize=32)
def _link_cached(spec: RrcSpec, O: int) -> tuple[np.ndarray, np.ndarray, float]:
    g, dt, half = _sampled(spec, O)
    T = spec.symbol_period_T
    L = chn.num_lags(spec.duration_D, T)
    lags = np.arange(-(L - 1), L)
    # alpha = g_tx * g_rx, noise correlation = int g(v) g(v + lT) dv (real pulses)
    conv = sps.fftconvolve(g, g) * dt
    acorr = sps.fftconvolve(g, g[::-1]) * dt
    centre = 2 * half
    idx = centre + lags * O
    ok = (idx >= 0) & (idx < conv.size)
    taps = np.zeros(lags.size)
    taps[ok] = conv[idx[ok]]
    corr = np.zeros(lags.size)
    corr[ok] = acorr[centre - lags[ok] * O]
    # In-band energy of the sampled pulse, exactly: int_{-W/2}^{W/2} |G(f)|^2 df
    # = dt^2 W sum_n R[n] sinc(W n dt), with R computed by FFT above.
    W = 1.0 / T
    n = np.arange(acorr.size) - centre
    e_in = dt * W * np.sum(acorr * np.sinc(W * n * dt))
    e_tot = acorr[centre]
    return taps, corr, float(e_tot / e_in - 1.0)


def baseline_link_quantities(spec: RrcSpec, N0: float = 1.0, oversampling: int = LINK_OVERSAMPLING) -> LinkQuantities:
    """Taps, noise correlations (for noise density ``N0``) and ACLR of the baseline pair."""
    taps, corr, aclr = _link_cached(spec, oversampling)
    return LinkQuantities(taps.astype(np.complex128), (N0 * corr).astype(np.complex128), aclr, float(N0))


# -- demapping and rate ---------------------------------------------------------------------
def awgn_llr(r, c: Constellation, N0: float) -> np.ndarray:
    """Exact (not max-log) AWGN LLRs ``ln P(b_k = 0 | r) / P(b_k = 1 | r)``.

    ``r`` has any shape; the result appends an axis of length ``K``.
    """
    if N0 <= 0:
        raise ValueError("N0 must be positive")
    r = np.asarray(r, dtype=np.complex128)
    metric = -np.abs(r[..., None] - c.points) ** 2 / N0  # (..., 2**K)
    lab = c.labels.astype(bool)  # (2**K, K)
    out = np.empty(r.shape + (c.bits_per_symbol_K,))
    for k in range(c.bits_per_symbol_K):
        zero = logsumexp(metric[..., ~lab[:, k]], axis=-1)
        one = logsumexp(metric[..., lab[:, k]], axis=-1)
        out[..., k] = zero - one
    return out


def bce_bits(llr_zero_over_one, bits) -> np.ndarray:
    """Per-bit ``-log2 Q(b | r)`` for LLRs in the ``ln P(0)/P(1)`` convention."""
    sign = 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)  # bit 0 -> +1
    return np.logaddexp(0.0, -sign * llr_zero_over_one) / np.log(2.0)


@dataclass(frozen=True)
class RateEstimate:
    rate: float
    stderr: float
    num_blocks: int


def baseline_rate(
    spec: RrcSpec | None,
    c: Constellation,
    N0: float,
    num_blocks: int = 200,
    block_len: int = 128,
    rng: np.random.Generator | None = None,
) -> RateEstimate:
    """Monte-Carlo BICM rate ``K - E[sum_k -log2 Q(b_k | r)]`` with the AWGN demapper.

    ``spec=None`` simulates an ideal ISI-free AWGN channel with noise
    variance ``N0``.  The standard error is taken across blocks.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    K = c.bits_per_symbol_K
    bits = rng.integers(0, 2, size=(num_blocks, block_len, K))
    idx = (bits << np.arange(K - 1, -1, -1)).sum(axis=-1)
    s = c.points[idx]
    w = chn.standard_complex_normal(rng, s.shape)
    if spec is None:
        r = s + np.sqrt(N0) * w
    else:
        ch = baseline_link_quantities(spec, N0).channel(block_len)
        r = chn.transmit(s, ch, w)
    loss = bce_bits(awgn_llr(r, c, N0), bits).sum(axis=-1).mean(axis=-1)  # per block
    rates = K - loss
    return RateEstimate(float(rates.mean()), float(rates.std(ddof=1) / np.sqrt(num_blocks)), num_blocks)


def baseline_papr(
    spec: RrcSpec,
    c: Constellation,
    n_symbols: int = 100_000,
    oversampling: int = 16,
    rng: np.random.Generator | None = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """PAPR (max/mean over the steady state) of a random baseline waveform.

    Returns ``(papr_db, t, x)`` so callers can reuse the rendered signal.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    s = c.points[rng.integers(0, c.points.size, size=n_symbols)]
    D = spec.duration_D
    t, x = env.render_signal(s, lambda u: baseline_filter(spec, u), D, oversampling, spec.symbol_period_T)
    mask = env.steady_state_mask(t, n_symbols, D, spec.symbol_period_T)
    return env.papr_db(x, mask), t[mask], x[mask]
