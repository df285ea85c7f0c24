"""Power-envelope statistics of the transmitted signal.

``p(t) = |x(t)|^2`` with ``x(t) = sum_m s_m g_tx(t - mT)`` for i.i.d. symbols.
Its variance has a closed form in the transmit pulse and three constellation
moments; ``avg_ped_variance`` averages it over one symbol period.  The
remaining helpers render oversampled waveforms and measure NPD, PAPR and PSD
on them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import autodiff as ad
from . import constellation as cst
from .autodiff import Tensor
from .constellation import Constellation
from .sinc_filter import FilterParams, eval_filter_freq, eval_filter_time

__all__ = [
    "EnvelopeReport",
    "ped_variance_at",
    "avg_ped_variance",
    "period_grid",
    "PedGrid",
    "avg_ped_variance_tensor",
    "render_signal",
    "steady_state_mask",
    "npd",
    "npd_ccdf",
    "papr_db",
    "psd",
    "psd_sampled",
    "write_ccdf_csv",
    "write_psd_csv",
    "envelope_report",
]

DEFAULT_GRID = 129


@dataclass
class EnvelopeReport:
    avg_ped_variance: float
    papr_db: float
    npd_samples: np.ndarray = field(repr=False)
    psd: tuple[np.ndarray, np.ndarray] = field(repr=False)


def _lags(t: np.ndarray, D: float, T: float) -> np.ndarray:
    """Symbol indices ``l`` that can satisfy ``|t - lT| < D/2`` for some ``t`` in ``t``."""
    lo = int(np.floor((np.min(t) - D / 2) / T))
    hi = int(np.ceil((np.max(t) + D / 2) / T))
    return np.arange(lo, hi + 1)


def _var_from_pulse(g: np.ndarray, mu4: float, mu2: float, mu2t: float) -> np.ndarray:
    a = np.abs(g) ** 2
    b = g**2
    sa2 = np.sum(a**2, axis=-1)
    cross_abs = np.sum(a, axis=-1) ** 2 - sa2
    cross_sq = np.abs(np.sum(b, axis=-1)) ** 2 - sa2
    return (mu4 - mu2**2) * sa2 + mu2**2 * cross_abs + mu2t * cross_sq


def ped_variance_at(theta, c: Constellation, t, D: float, T: float = 1.0) -> np.ndarray:
    """``Var(p(t))`` for i.i.d. symbols drawn uniformly from ``c``.

    Accepts scalar or array ``t``.  Assumes a zero-mean constellation.
    """
    t = np.asarray(t, dtype=np.float64)
    p = FilterParams(theta, D, "tx")
    lags = _lags(np.atleast_1d(t), D, T)
    g = eval_filter_time(p, t[..., None] - lags * T)
    return _var_from_pulse(g, *cst.moments(c))


def period_grid(D: float, T: float = 1.0, G: int = DEFAULT_GRID) -> np.ndarray:
    """Midpoints of ``G`` cells covering one symbol period.

    ``Var(p(t))`` is ``T``-periodic and jumps where ``t - lT`` crosses the
    filter edges ``+-D/2``, i.e. at ``t = D/2 mod T``.  The period is taken to
    start there, which is equivalent to ``(-T/2, T/2)`` and keeps the jump on a
    cell boundary.
    """
    start = np.mod(D / 2, T)
    if start >= T / 2:
        start -= T
    return start + (np.arange(G) + 0.5) * T / G


def avg_ped_variance(theta, c: Constellation, D: float, T: float = 1.0, G: int = DEFAULT_GRID) -> float:
    """Period average ``V = E_t[Var(p(t))]`` by the midpoint rule on ``G`` points."""
    return float(np.mean(ped_variance_at(theta, c, period_grid(D, T, G), D, T)))


class PedGrid:
    """Precomputed pulse-evaluation matrix for the differentiable ``V(theta, C)``.

    ``phase[g, l, :] @ theta`` equals ``D / sqrt(C) * g_tx(t_g - lT)``.
    """

    def __init__(self, S: int, D: float, T: float = 1.0, G: int = DEFAULT_GRID):
        self.S, self.D, self.T, self.G = S, D, T, G
        t = period_grid(D, T, G)
        lags = _lags(t, D, T)
        tau = t[:, None] - lags[None, :] * T
        s = np.arange(-S, S + 1)
        phase = np.exp(2j * np.pi * tau[..., None] * s / D) * (np.abs(tau) < D / 2)[..., None]
        self.phase = phase
        self._phase_t = Tensor(ad.from_complex(phase))


def avg_ped_variance_tensor(theta: Tensor, points: Tensor, grid: PedGrid) -> Tensor:
    """Differentiable ``V``; ``theta`` and normalized ``points`` are paired tensors."""
    energy = ad.cabs2(theta).sum()
    scale2 = 1.0 / (energy * grid.D)  # (sqrt(C)/D)^2 = 1 / (D theta^H theta)
    u = ad.cmatmul(grid._phase_t, theta.reshape(1, theta.shape[0], 1, 2)).reshape(grid.G, -1, 2)
    a = ad.cabs2(u) * scale2
    b = ad.cmul(u, u) * scale2
    sa2 = (a * a).sum(axis=-1)
    sa = a.sum(axis=-1)
    sb = b.sum(axis=1)
    mu4, mu2, mu2t = cst.moments_tensor(points)
    var = (mu4 - mu2 * mu2) * sa2 + mu2 * mu2 * (sa * sa - sa2) + mu2t * (ad.cabs2(sb) - sa2)
    return var.mean()


# -- rendering and empirical statistics ---------------------------------------------------
def _pulse_samples(pulse, D: float, T: float, oversampling: int) -> tuple[np.ndarray, int]:
    half = int(np.ceil(D / 2 * oversampling / T))
    t = np.arange(-half, half + 1) * T / oversampling
    if isinstance(pulse, FilterParams):
        g = eval_filter_time(pulse, t)
    else:
        g = np.where(np.abs(t) < D / 2, pulse(t), 0.0)
    return np.asarray(g, dtype=np.complex128), half


def render_signal(
    symbols, pulse: FilterParams | Callable, D: float, oversampling: int = 16, T: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``x(t) = sum_m s_m g(t - mT)`` on the grid ``t = k T / O``.

    ``pulse`` is a transmit :class:`FilterParams` or a callable ``g(t)``.
    Returns ``(t, x)`` covering ``[-D/2, (N-1)T + D/2]``, edge transients included.
    """
    if oversampling < 4:
        raise ValueError("oversampling must be at least 4")
    s = np.asarray(symbols, dtype=np.complex128)
    g, half = _pulse_samples(pulse, D, T, oversampling)
    up = np.zeros(s.size * oversampling - oversampling + 1, dtype=np.complex128)
    up[::oversampling] = s
    x = np.convolve(up, g)
    t = (np.arange(x.size) - half) * T / oversampling
    return t, x


def steady_state_mask(t: np.ndarray, n_symbols: int, D: float, T: float = 1.0) -> np.ndarray:
    """Samples at least ``D/2`` away from both temporal edges of the block."""
    eps = 1e-9 * T
    return (t >= D / 2 - eps) & (t < (n_symbols - 1) * T - D / 2 - eps)


def _steady(x, mask) -> np.ndarray:
    x = np.asarray(x)
    if mask is not None:
        x = x[mask]
    if x.size == 0:
        raise ValueError("empty steady-state region")
    return x


def npd(signal, mask=None) -> np.ndarray:
    """Normalized power deviation ``|p - E[p]| / E[p]`` per sample."""
    p = np.abs(_steady(signal, mask)) ** 2
    m = p.mean()
    return np.abs(p - m) / m


def npd_ccdf(signal, mask=None, thresholds=None) -> tuple[np.ndarray, np.ndarray]:
    """Empirical ``P(NPD > threshold)``; default thresholds span 0..max NPD on 200 points."""
    d = np.sort(npd(signal, mask))
    if thresholds is None:
        thresholds = np.linspace(0.0, d[-1], 200)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    prob = 1.0 - np.searchsorted(d, thresholds, side="right") / d.size
    return thresholds, prob


def papr_db(signal, mask=None) -> float:
    """``10 log10(max p / mean p)`` over the (steady-state) samples."""
    p = np.abs(_steady(signal, mask)) ** 2
    return float(10 * np.log10(p.max() / p.mean()))


def psd(params: FilterParams, f) -> tuple[np.ndarray, np.ndarray]:
    """Energy spectral density ``|g_hat_tx(f)|^2`` (unit total energy) in dB."""
    if params.role != "tx":
        raise ValueError("psd expects a transmit filter")
    f = np.asarray(f, dtype=np.float64)
    dens = np.abs(eval_filter_freq(params, f)) ** 2
    with np.errstate(divide="ignore"):
        return f, 10 * np.log10(dens)


def psd_sampled(g: np.ndarray, dt: float, nfft: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Energy spectral density of a densely sampled pulse, normalized to unit energy.

    Returns ``(f, density_dB)`` with ``f`` in cycles per time unit, ascending.
    """
    g = np.asarray(g, dtype=np.complex128)
    nfft = nfft or int(2 ** np.ceil(np.log2(g.size * 16)))
    spec = np.fft.fftshift(np.fft.fft(g, nfft)) * dt
    f = np.fft.fftshift(np.fft.fftfreq(nfft, dt))
    dens = np.abs(spec) ** 2
    dens /= np.sum(dens) * (f[1] - f[0])
    with np.errstate(divide="ignore"):
        return f, 10 * np.log10(dens)


def envelope_report(theta, c: Constellation, D: float, symbols, oversampling: int = 16,
                    T: float = 1.0, f=None) -> EnvelopeReport:
    p = FilterParams(theta, D, "tx")
    t, x = render_signal(symbols, p, D, oversampling, T)
    mask = steady_state_mask(t, len(symbols), D, T)
    f = np.linspace(-2.0 / T, 2.0 / T, 801) if f is None else f
    return EnvelopeReport(
        avg_ped_variance=avg_ped_variance(theta, c, D, T),
        papr_db=papr_db(x, mask),
        npd_samples=npd(x, mask),
        psd=psd(p, f),
    )


def write_ccdf_csv(path, thresholds, prob) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "probability"])
        for a, b in zip(thresholds, prob):
            w.writerow([repr(float(a)), repr(float(b))])


def write_psd_csv(path, f_hz, power_db) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency_hz", "power_db"])
        for a, b in zip(f_hz, power_db):
            w.writerow([repr(float(a)), repr(float(b))])
