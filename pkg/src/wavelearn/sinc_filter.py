"""Closed-form algebra for time-limited filters in the shifted-sinc basis.

A filter time-limited to ``(-D/2, D/2)`` is written in the frequency domain as

    g_hat(f) = sum_{s=-S..S} c_s sinc(D f - s)

so that in time it is the truncated Fourier series
``g(t) = (1/D) rect(t/D) sum_s c_s exp(j 2 pi s t / D)``.  Transmit filters
carry an extra ``sqrt(C)`` factor with ``C = D / (c^H c)`` which gives them
unit energy.  Everything needed for training (effective channel, noise
correlation, in-band energy) reduces to bilinear forms in the coefficient
vectors with the Gram matrices built here.

``sinc`` is the normalized sinc, ``sin(pi x) / (pi x)``.
"""

from __future__ import annotations

import json
import math
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from scipy import integrate, special

__all__ = [
    "FilterParams",
    "BandSpec",
    "GramMatrix",
    "tx_norm_const",
    "eval_filter_time",
    "eval_filter_freq",
    "build_gram_A",
    "build_gram_Aprime",
    "effective_channel_alpha",
    "noise_covariance",
    "build_E",
    "in_band_energy",
    "aclr",
    "aclr_from_in_band",
    "E_QUAD_TOL",
]

E_QUAD_TOL = 1e-12


@dataclass(frozen=True)
class BandSpec:
    """Symbol period and system bandwidth; ``W = 1/T``."""

    symbol_period_T: float = 1.0

    @property
    def bandwidth_W(self) -> float:
        return 1.0 / self.symbol_period_T


@dataclass
class FilterParams:
    """Sinc-basis coefficients ``c_{-S..S}`` of a filter of duration ``D``.

    ``coeffs[i]`` is the coefficient of index ``s = i - S``.
    """

    coeffs: np.ndarray
    duration_D: float
    role: Literal["tx", "rx"] = "tx"

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.ndim != 1 or self.coeffs.size % 2 != 1:
            raise ValueError("coeffs must be a 1-D vector of odd length 2S+1")
        if self.duration_D <= 0:
            raise ValueError("duration_D must be positive")
        if self.role not in ("tx", "rx"):
            raise ValueError("role must be 'tx' or 'rx'")
        if self.role == "tx" and not np.any(self.coeffs):
            raise ValueError("transmit filter coefficients must not all be zero")

    @property
    def half_size_S(self) -> int:
        return (self.coeffs.size - 1) // 2

    @property
    def indices(self) -> np.ndarray:
        S = self.half_size_S
        return np.arange(-S, S + 1)


@dataclass
class GramMatrix:
    entries: np.ndarray
    kind: Literal["A", "Aprime", "E"]
    eval_time_t: float | None = field(default=None)


def _indices(S: int) -> np.ndarray:
    return np.arange(-S, S + 1)


def tx_norm_const(theta, D: float) -> float:
    """Normalization ``C(theta) = D / theta^H theta`` giving unit transmit energy."""
    theta = np.asarray(theta, dtype=np.complex128)
    energy = float(np.real(np.vdot(theta, theta)))
    if energy == 0.0:
        raise ValueError("theta must not be the zero vector")
    return D / energy


def _prefactor(params: FilterParams, normalize: bool | None) -> float:
    if normalize is None:
        normalize = params.role == "tx"
    scale = 1.0 / params.duration_D
    if normalize:
        scale *= np.sqrt(tx_norm_const(params.coeffs, params.duration_D))
    return scale


def eval_filter_time(params: FilterParams, t, normalize: bool | None = None) -> np.ndarray:
    """Impulse response at times ``t``; zero outside the open interval ``(-D/2, D/2)``.

    ``normalize`` defaults to ``True`` for transmit filters (applies ``sqrt(C)``).
    """
    t = np.asarray(t, dtype=np.float64)
    D = params.duration_D
    phase = np.exp(2j * np.pi * np.multiply.outer(t, params.indices) / D)
    vals = phase @ params.coeffs * _prefactor(params, normalize)
    return np.where(np.abs(t) < D / 2, vals, 0.0)


def eval_filter_freq(params: FilterParams, f, normalize: bool | None = None) -> np.ndarray:
    """Frequency response ``(sqrt(C) if tx) * sum_s c_s sinc(D f - s)``."""
    f = np.asarray(f, dtype=np.float64)
    D = params.duration_D
    basis = np.sinc(np.subtract.outer(D * f, params.indices))
    scale = _prefactor(params, normalize) * D
    return basis @ params.coeffs * scale


def _overlap_gram(t: float, S: int, D: float, primed: bool) -> np.ndarray:
    x = -t / D if primed else t / D
    l_max = min(0.5, x + 0.5)
    l_min = max(-0.5, x - 0.5)
    delta = l_max - l_min
    size = 2 * S + 1
    if delta <= 0:
        return np.zeros((size, size), dtype=np.complex128)
    ssum = l_max + l_min
    s = _indices(S).astype(np.float64)
    s1 = s[:, None]
    s2 = s[None, :]
    k = (s1 - s2) if primed else (s2 - s1)
    k_safe = np.where(k == 0, 1.0, k)
    # sin(pi k delta) for integer k, written around delta = 1 so A(0) is exactly I.
    sign = np.where(k % 2 == 0, -1.0, 1.0)
    sin_k = sign * np.sin(np.pi * k * (1.0 - delta))
    off = np.exp(1j * np.pi * (2 * s1 * t / D + k * ssum)) * sin_k / (np.pi * k_safe)
    diag = np.exp(2j * np.pi * s * t / D) * delta
    out = np.where(k == 0, 0.0, off)
    out[np.diag_indices(size)] = diag
    return out


def build_gram_A(t: float, S: int, D: float) -> GramMatrix:
    """Overlap matrix ``A(t)`` with ``alpha(t) = sqrt(C)/D * theta^T A(t) psi``."""
    return GramMatrix(_overlap_gram(float(t), S, D, primed=False), "A", float(t))


def build_gram_Aprime(t: float, S: int, D: float) -> GramMatrix:
    """Overlap matrix ``A'(t)`` entering the noise correlation ``psi^T A'(t) psi^*``."""
    return GramMatrix(_overlap_gram(float(t), S, D, primed=True), "Aprime", float(t))


def effective_channel_alpha(theta, psi, t: float, D: float) -> complex:
    """Transmit/receive convolution ``alpha(t) = int g_tx(z) g_rx(t - z) dz``."""
    theta = np.asarray(theta, dtype=np.complex128)
    psi = np.asarray(psi, dtype=np.complex128)
    if abs(t) >= D:
        return 0.0j
    S = (theta.size - 1) // 2
    a = build_gram_A(t, S, D).entries
    return complex(np.sqrt(tx_norm_const(theta, D)) / D * (theta @ a @ psi))


def noise_covariance(psi, lag: float, N0: float, D: float) -> complex:
    """Correlation ``E[n_m n*_{m+l}]`` of the filtered noise samples, ``lag = l T``.

    For noise ``n_m = int w(z) g_rx(mT - z) dz`` this equals
    ``N0 int g_rx(v) g_rx*(v + lT) dv``.  The closed form
    ``(N0/D) psi^T A'(tau) psi^*`` evaluates ``N0 int g_rx(z) g_rx*(z - tau) dz``,
    hence it is used at ``tau = -lag``.
    """
    if N0 < 0:
        raise ValueError("N0 must be nonnegative")
    psi = np.asarray(psi, dtype=np.complex128)
    if abs(lag) >= D:
        return 0.0j
    S = (psi.size - 1) // 2
    ap = build_gram_Aprime(-lag, S, D).entries
    return complex(N0 / D * (psi @ ap @ np.conj(psi)))


# -- in-band energy matrix ------------------------------------------------------------
_E_CACHE: dict[tuple, np.ndarray] = {}
_E_LOCK = threading.Lock()


def _cache_dir() -> Path | None:
    env = os.environ.get("WAVELEARN_CACHE")
    if env == "":
        return None
    return Path(env) if env else Path.home() / ".cache" / "wavelearn"


def _sinc_scalar(x: float) -> float:
    if x == 0.0:
        return 1.0
    px = math.pi * x
    return math.sin(px) / px


def _e_entry(a: int, b: int, half_width: float) -> float:
    def integrand(x):
        return _sinc_scalar(x - a) * _sinc_scalar(x - b)

    val, _ = integrate.quad(integrand, -half_width, half_width, epsabs=E_QUAD_TOL, epsrel=0.0, limit=400)
    return val


def _sin2_over_u(u):
    """Antiderivative of ``sin(pi u)**2 / u`` (even, continuous at 0)."""
    u = np.abs(np.asarray(u, dtype=np.float64))
    _, ci = special.sici(2 * np.pi * np.where(u == 0, 1.0, u))
    out = 0.5 * (np.log(np.where(u == 0, 1.0, u)) - ci)
    return np.where(u == 0, -0.5 * (np.euler_gamma + np.log(2 * np.pi)), out)


def _sinc2(u):
    """Antiderivative of ``sinc(u)**2``."""
    u = np.asarray(u, dtype=np.float64)
    si, _ = special.sici(2 * np.pi * u)
    safe = np.where(u == 0, 1.0, u)
    return np.where(u == 0, 0.0, si / np.pi - np.sin(np.pi * u) ** 2 / (np.pi**2 * safe))


def _closed_E_scaled(S: int, dw: float) -> np.ndarray:
    """``D * E`` from sine/cosine integrals.

    For integers a != b, ``sinc(x-a) sinc(x-b)`` partial-fractions into
    ``(-1)^(a+b) sin^2(pi x) [1/(x-a) - 1/(x-b)] / (pi^2 (a-b))``.
    """
    s = np.arange(-S, S + 1)
    X = dw / 2
    diag = _sinc2(X - s) - _sinc2(-X - s)
    g = _sin2_over_u(X - s) - _sin2_over_u(-X - s)
    a = s[:, None]
    b = s[None, :]
    diff = np.where(a == b, 1, a - b)
    sign = np.where((a + b) % 2 == 0, 1.0, -1.0)
    out = sign * (g[:, None] - g[None, :]) / (np.pi**2 * diff)
    out[np.diag_indices(s.size)] = diag
    return 0.5 * (out + out.T)


def _compute_E_scaled(S: int, dw: float) -> np.ndarray:
    """``D * E`` by adaptive quadrature, entry by entry."""
    size = 2 * S + 1
    out = np.zeros((size, size))
    done = np.zeros((size, size), dtype=bool)
    half = dw / 2
    for i, a in enumerate(range(-S, S + 1)):
        for j, b in enumerate(range(a, S + 1), start=i):
            if done[i, j]:
                continue
            v = _e_entry(a, b, half)
            # Symmetric under (a, b) -> (b, a) and (a, b) -> (-a, -b).
            for p, q in ((i, j), (j, i), (size - 1 - i, size - 1 - j), (size - 1 - j, size - 1 - i)):
                out[p, q] = v
                done[p, q] = True
    return out


def build_E(
    S: int,
    D: float,
    band: BandSpec | None = None,
    cache: bool = True,
    method: Literal["closed", "quad"] = "closed",
) -> GramMatrix:
    """In-band Gram matrix ``E_{s1,s2} = int_{-W/2}^{W/2} sinc(Df - s1) sinc(Df - s2) df``.

    ``method="closed"`` evaluates the exact sine/cosine-integral expression;
    ``method="quad"`` integrates each entry by adaptive Gauss-Kronrod
    quadrature to an absolute tolerance of ``E_QUAD_TOL`` (in units of
    ``1/D``; unreliable when ``D W`` is very large).  Results are cached in
    memory and on disk (``$WAVELEARN_CACHE``, default ``~/.cache/wavelearn``;
    set it to an empty string to disable the disk cache).
    """
    band = band or BandSpec()
    T = band.symbol_period_T
    key = (int(S), round(D / T, 12), round(band.bandwidth_W * T, 12), method)
    with _E_LOCK:
        scaled = _E_CACHE.get(key) if cache else None
    if scaled is None:
        path = None
        d = _cache_dir() if cache else None
        if d is not None:
            path = d / f"E_S{key[0]}_D{key[1]:g}T_W{key[2]:g}_{method}.json"
            scaled = _load_E(path, key)
        if scaled is None:
            compute = _closed_E_scaled if method == "closed" else _compute_E_scaled
            scaled = compute(S, D * band.bandwidth_W)
            if path is not None:
                _save_E(path, key, scaled)
        if cache:
            with _E_LOCK:
                _E_CACHE.setdefault(key, scaled)
    return GramMatrix(scaled / D, "E")


def _load_E(path: Path, key) -> np.ndarray | None:
    try:
        doc = json.loads(path.read_text())
    except (OSError, ValueError):
        return None
    hdr = doc.get("header", {})
    if (hdr.get("S"), hdr.get("D_over_T"), hdr.get("W_times_T"), hdr.get("method"), hdr.get("tolerance")) != (
        key[0], key[1], key[2], key[3], E_QUAD_TOL
    ):
        return None
    size = 2 * key[0] + 1
    vals = np.asarray(doc.get("values", []), dtype=np.float64)
    if vals.size != size * size:
        return None
    return vals.reshape(size, size)


def _save_E(path: Path, key, scaled: np.ndarray) -> None:
    doc = {
        "header": {
            "S": key[0],
            "D_over_T": key[1],
            "W_times_T": key[2],
            "method": key[3],
            "tolerance": E_QUAD_TOL,
            "units": "entries multiplied by D",
        },
        "values": scaled.ravel().tolist(),
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc))
        tmp.replace(path)
    except OSError:
        pass


def in_band_energy(theta, E, D: float) -> float:
    """Fraction of transmit energy inside ``(-W/2, W/2)``: ``C(theta) theta^H E theta``."""
    theta = np.asarray(theta, dtype=np.complex128)
    e = E.entries if isinstance(E, GramMatrix) else np.asarray(E)
    return float(tx_norm_const(theta, D) * np.real(np.vdot(theta, e @ theta)))


def aclr_from_in_band(e_in: float) -> float:
    """ACLR of a unit-energy filter with in-band energy ``e_in``."""
    return 1.0 / e_in - 1.0


def aclr(theta, E, D: float) -> float:
    """Adjacent-channel leakage ratio ``E_O / E_I = 1 / E_I - 1``."""
    return aclr_from_in_band(in_band_energy(theta, E, D))
