"""Discrete-equivalent AWGN link.

The receiver observes ``r_m = sum_l s_{m-l} alpha(lT) + n_m`` with Gaussian
noise whose Toeplitz covariance follows from the receive filter.  Both the
numpy path (:class:`DiscreteChannel`) and the differentiable path
(:class:`ChannelGrams` + ``*_tensor`` functions) are provided; they share the
same conventions:

* taps are stored for ``l = -(L-1) .. L-1`` with ``L = ceil(D/T)``;
* block edges use linear convolution with zero symbols outside ``0..N-1``;
* ``Sigma[m, n] = E[n_m n_n^*] = cov(n - m)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.linalg import LinAlgError

from . import autodiff as ad
from .autodiff import Tensor
from .errors import NumericalError
from .sinc_filter import build_gram_A, build_gram_Aprime, effective_channel_alpha, noise_covariance

__all__ = [
    "JITTER_SCHEDULE",
    "DiscreteChannel",
    "ChannelGrams",
    "cholesky_psd",
    "cholesky_psd_tensor",
    "toeplitz_from_lags",
    "make_channel",
    "channel_from_lags",
    "transmit",
    "taps_tensor",
    "noise_lags_tensor",
    "covariance_tensor",
    "transmit_tensor",
    "standard_complex_normal",
]

JITTER_SCHEDULE = (0.0, 1e-12, 1e-10, 1e-8)


def num_lags(D: float, T: float = 1.0) -> int:
    """``L`` such that ``alpha(lT)`` and the noise correlation vanish for ``|l| >= L``."""
    return int(np.ceil(D / T - 1e-12))


@dataclass(frozen=True)
class DiscreteChannel:
    taps: np.ndarray
    noise_chol: np.ndarray
    N0: float

    def __post_init__(self):
        if self.taps.ndim != 1 or self.taps.size % 2 == 0:
            raise ValueError("taps must be an odd-length vector centered at l = 0")
        n = self.noise_chol.shape
        if len(n) != 2 or n[0] != n[1]:
            raise ValueError("noise_chol must be square")

    @property
    def L(self) -> int:
        return (self.taps.size + 1) // 2

    @property
    def N(self) -> int:
        return self.noise_chol.shape[0]

    def tap(self, l: int) -> complex:
        return complex(self.taps[l + self.L - 1]) if abs(l) < self.L else 0.0j

    @property
    def covariance(self) -> np.ndarray:
        return self.noise_chol @ self.noise_chol.conj().T


def cholesky_psd(matrix, schedule=JITTER_SCHEDULE) -> np.ndarray:
    """Lower factor of a Hermitian PSD matrix, escalating diagonal jitter on failure."""
    m = np.asarray(matrix)
    if not np.allclose(m, m.conj().T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
        raise ValueError("matrix is not Hermitian")
    eye = np.eye(m.shape[0])
    for jitter in schedule:
        try:
            return np.linalg.cholesky(m + jitter * eye)
        except LinAlgError:
            continue
    raise NumericalError(f"Cholesky failed after jitter schedule {tuple(schedule)}")


def cholesky_psd_tensor(matrix: Tensor, schedule=JITTER_SCHEDULE) -> Tensor:
    """Differentiable :func:`cholesky_psd` for paired ``(N, N, 2)`` matrices."""
    for jitter in schedule:
        try:
            return ad.cholesky(matrix, jitter)
        except LinAlgError:
            continue
    raise NumericalError(f"Cholesky failed after jitter schedule {tuple(schedule)}")


def _toeplitz_index(N: int, L: int) -> np.ndarray:
    """Index into a ``2L`` lag table (last slot holds zero) for ``lag = n - m``."""
    lag = np.arange(N)[None, :] - np.arange(N)[:, None]
    return np.where(np.abs(lag) < L, lag + L - 1, 2 * L - 1)


def toeplitz_from_lags(lags: np.ndarray, N: int) -> np.ndarray:
    """``Sigma[m, n] = lags[(n - m) + L - 1]`` with zeros beyond the table."""
    lags = np.asarray(lags, dtype=np.complex128)
    L = (lags.size + 1) // 2
    return np.append(lags, 0.0)[_toeplitz_index(N, L)]


def _isi_index(N: int, L: int) -> np.ndarray:
    """Index for ``H[m, n] = taps[(m - n) + L - 1]`` with a zero slot at ``2L - 1``."""
    lag = np.arange(N)[:, None] - np.arange(N)[None, :]
    return np.where(np.abs(lag) < L, lag + L - 1, 2 * L - 1)


def channel_from_lags(taps, cov_lags, N: int, N0: float) -> DiscreteChannel:
    """Build a channel from tabulated taps and noise correlations (``l = -(L-1)..L-1``)."""
    taps = np.asarray(taps, dtype=np.complex128)
    chol = cholesky_psd(toeplitz_from_lags(cov_lags, N))
    return DiscreteChannel(taps, chol, float(N0))


def make_channel(theta, psi, N: int, N0: float, D: float, T: float = 1.0) -> DiscreteChannel:
    """Discrete channel for sinc-basis filters ``theta`` (tx) and ``psi`` (rx)."""
    if not np.any(np.asarray(theta)):
        raise ValueError("theta must be nonzero")
    L = num_lags(D, T)
    lags = np.arange(-(L - 1), L) * T
    taps = np.array([effective_channel_alpha(theta, psi, t, D) for t in lags])
    cov = np.array([noise_covariance(psi, t, N0, D) for t in lags])
    return channel_from_lags(taps, cov, N, N0)


def standard_complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian with ``E|w|^2 = 1``."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def transmit(symbols, ch: DiscreteChannel, noise_draw) -> np.ndarray:
    """``r = H s + chol @ w`` for one block or a batch ``(..., N)``."""
    s = np.asarray(symbols, dtype=np.complex128)
    w = np.asarray(noise_draw, dtype=np.complex128)
    if s.shape[-1] != ch.N or w.shape != s.shape:
        raise ValueError(f"symbols and noise_draw must have trailing length {ch.N} and equal shapes")
    H = np.append(ch.taps, 0.0)[_isi_index(ch.N, ch.L)]
    return s @ H.T + w @ ch.noise_chol.T


# -- differentiable path ------------------------------------------------------------------
class ChannelGrams:
    """Constant overlap matrices that turn ``(theta, psi)`` into taps and noise lags."""

    def __init__(self, S: int, D: float, N: int, T: float = 1.0):
        self.S, self.D, self.N, self.T = S, D, N, T
        self.L = L = num_lags(D, T)
        lags = np.arange(-(L - 1), L) * T
        a = np.stack([build_gram_A(t, S, D).entries for t in lags])
        ap = np.stack([build_gram_Aprime(-t, S, D).entries for t in lags])
        self.A = Tensor(ad.from_complex(a))
        self.Aprime = Tensor(ad.from_complex(ap))
        self.toeplitz_index = _toeplitz_index(N, L)
        self.isi_index = _isi_index(N, L)


def taps_tensor(theta: Tensor, psi: Tensor, grams: ChannelGrams) -> Tensor:
    """Paired ``(2L-1, 2)`` taps ``sqrt(C)/D * theta^T A(lT) psi``."""
    n = theta.shape[0]
    scale = 1.0 / ad.sqrt(ad.cabs2(theta).sum() * grams.D)
    row = ad.cmatmul(theta.reshape(1, 1, n, 2), grams.A)  # (2L-1, 1, n, 2)
    val = ad.cmatmul(row, psi.reshape(1, n, 1, 2)).reshape(-1, 2)
    return val * scale


def noise_lags_tensor(psi: Tensor, grams: ChannelGrams, N0: float) -> Tensor:
    """Paired noise correlations ``E[n_m n*_{m+l}]`` for ``l = -(L-1)..L-1``."""
    n = psi.shape[0]
    row = ad.cmatmul(psi.reshape(1, 1, n, 2), grams.Aprime)
    val = ad.cmatmul(row, ad.conj(psi).reshape(1, n, 1, 2)).reshape(-1, 2)
    return val * (N0 / grams.D)


def _gather_with_zero(table: Tensor, index: np.ndarray) -> Tensor:
    padded = ad.concatenate([table, Tensor(np.zeros((1, 2)))], axis=0)
    return padded[index]


def covariance_tensor(psi: Tensor, grams: ChannelGrams, N0: float) -> Tensor:
    """Paired ``(N, N, 2)`` Toeplitz noise covariance."""
    return _gather_with_zero(noise_lags_tensor(psi, grams, N0), grams.toeplitz_index)


def transmit_tensor(symbols: Tensor, taps: Tensor, chol: Tensor, noise_draw, grams: ChannelGrams) -> Tensor:
    """Differentiable ``r = H s + chol w`` for a batch of paired symbol blocks ``(M, N, 2)``.

    ``noise_draw`` is a fixed complex array ``(M, N)``; gradients reach the
    receive filter through ``chol`` (reparameterization).
    """
    H = _gather_with_zero(taps, grams.isi_index)  # (N, N, 2)
    w = Tensor(ad.from_complex(np.asarray(noise_draw, dtype=np.complex128)[..., None]))  # (M, N, 1, 2)
    isi = ad.cmatmul(H, symbols.reshape(*symbols.shape[:-2], grams.N, 1, 2))
    noise = ad.cmatmul(chol, w)
    return (isi + noise).reshape(*symbols.shape)
