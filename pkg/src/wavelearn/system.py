"""End-to-end differentiable link: sinc-basis filters, learned constellation, channel, detector.

``EndToEnd.forward`` builds one tape from the trainable parameters
``{theta, psi, raw constellation, detector}`` to the BCE loss and the two
closed-form constraint values (ACLR and V).  The numpy functions in
:mod:`wavelearn.sinc_filter` and :mod:`wavelearn.envelope` give the same
values without a tape and are used for reporting and dual updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import baseline as bl
from . import channel as chn
from . import constellation as cst
from . import detector as det
from . import envelope as env
from .autodiff import Tensor
from .config import RunConfig
from .sinc_filter import aclr as aclr_np
from .sinc_filter import build_E, tx_norm_const

__all__ = ["SystemParams", "Forward", "EndToEnd", "fourier_coeffs", "aclr_tensor"]


def fourier_coeffs(pulse, S: int, D: float, oversampling: int = 256) -> np.ndarray:
    """``c_s = int g(t) exp(-j 2 pi s t / D) dt`` for a pulse supported on ``(-D/2, D/2)``.

    A time-limited pulse equals ``(1/D) sum_s c_s exp(j 2 pi s t / D)`` on its
    support, so these are its sinc-basis coefficients up to normalization.
    """
    n = int(np.ceil(D * oversampling))
    t = -D / 2 + (np.arange(n) + 0.5) * D / n
    g = pulse(t)
    s = np.arange(-S, S + 1)
    return np.exp(-2j * np.pi * np.outer(s, t) / D) @ g * (D / n)


def aclr_tensor(theta: Tensor, E: np.ndarray, D: float) -> Tensor:
    """``theta^H theta / (D theta^H E theta) - 1``, i.e. ``1/E_I - 1``."""
    energy = ad.cabs2(theta).sum()
    return energy / (ad.cquad_form(theta, E) * D) - 1.0


@dataclass
class SystemParams:
    theta: Tensor
    psi: Tensor
    raw_points: Tensor
    detector: det.DetectorParams

    def tensors(self) -> list[Tensor]:
        return [self.theta, self.psi, self.raw_points, *self.detector.tensors]

    # -- numpy views
    @property
    def theta_c(self) -> np.ndarray:
        return ad.to_complex(self.theta.data)

    @property
    def psi_c(self) -> np.ndarray:
        return ad.to_complex(self.psi.data)

    def constellation(self) -> cst.Constellation:
        return cst.normalize(ad.to_complex(self.raw_points.data), self.detector.cfg.K)

    def to_flat(self) -> np.ndarray:
        return np.concatenate([t.data.ravel() for t in self.tensors()])

    def load_flat(self, flat: np.ndarray) -> None:
        pos = 0
        for t in self.tensors():
            t.data[...] = flat[pos : pos + t.data.size].reshape(t.shape)
            pos += t.data.size
        if pos != flat.size:
            raise ValueError(f"parameter vector has {flat.size} values, expected {pos}")


@dataclass
class Forward:
    loss: Tensor
    aclr: Tensor
    V: Tensor


class EndToEnd:
    """Precomputed matrices for one link configuration plus the forward pass."""

    def __init__(self, cfg: RunConfig):
        link = cfg.link
        self.cfg = cfg
        self.S, self.D, self.N, self.K = link.half_size_S, link.D, link.block_length_N, link.bits_per_symbol_K
        self.N0 = link.N0
        self.E = build_E(self.S, self.D).entries
        self.grams = chn.ChannelGrams(self.S, self.D, self.N)
        self.ped = env.PedGrid(self.S, self.D, G=cfg.train.v_grid_G)
        d = cfg.detector
        self.det_cfg = det.DetectorConfig(self.K, d.features_F, d.kernel, tuple(d.dilations))
        if self.N < det.receptive_field(self.det_cfg):
            raise ValueError("block length is below the detector receptive field")

    # -- parameters
    def init_params(self, rng: np.random.Generator) -> SystemParams:
        """Windowed-RRC (beta = 0) matched pair, Gray QAM, Kaiming-initialized detector."""
        spec = bl.RrcSpec(0.0, self.D)
        theta = fourier_coeffs(lambda t: bl.baseline_filter(spec, t), self.S, self.D)
        theta = theta / np.sqrt(np.real(np.vdot(theta, theta)) / theta.size)
        psi = np.sqrt(tx_norm_const(theta, self.D)) * np.conj(theta)
        pts = cst.gray_qam(self.K).points if self.K % 2 == 0 else _psk(self.K)
        return SystemParams(
            Tensor(ad.from_complex(theta), requires_grad=True),
            Tensor(ad.from_complex(psi), requires_grad=True),
            Tensor(ad.from_complex(pts), requires_grad=True),
            det.init_detector(self.det_cfg, rng),
        )

    def params_from_flat(self, flat: np.ndarray) -> SystemParams:
        p = self.init_params(np.random.default_rng(0))
        p.load_flat(flat)
        return p

    # -- forward
    def received(self, params: SystemParams, bits: np.ndarray, noise: np.ndarray) -> Tensor:
        points = cst.normalize_tensor(params.raw_points)
        s = cst.modulate_tensor(bits, points)
        taps = chn.taps_tensor(params.theta, params.psi, self.grams)
        chol = chn.cholesky_psd_tensor(chn.covariance_tensor(params.psi, self.grams, self.N0))
        return chn.transmit_tensor(s, taps, chol, noise, self.grams)

    def forward(self, params: SystemParams, bits: np.ndarray, noise: np.ndarray) -> Forward:
        """``bits``: ``(M, N, K)`` in {0, 1}; ``noise``: standard complex normal ``(M, N)``."""
        r = self.received(params, bits, noise)
        loss = det.bce_loss(bits, det.detect(r, params.detector))
        points = cst.normalize_tensor(params.raw_points)
        return Forward(loss, aclr_tensor(params.theta, self.E, self.D), env.avg_ped_variance_tensor(params.theta, points, self.ped))

    # -- exact constraint values (numpy)
    def aclr(self, params: SystemParams) -> float:
        return aclr_np(params.theta_c, self.E, self.D)

    def ped_variance(self, params: SystemParams) -> float:
        return env.avg_ped_variance(params.theta_c, params.constellation(), self.D, G=self.cfg.train.v_grid_G)

    def draw_batch(self, bits_rng: np.random.Generator, noise_rng: np.random.Generator, M: int):
        bits = bits_rng.integers(0, 2, size=(M, self.N, self.K))
        noise = chn.standard_complex_normal(noise_rng, (M, self.N))
        return bits, noise


def _psk(K: int) -> np.ndarray:
    return np.exp(2j * np.pi * (np.arange(2**K) + 0.5) / 2**K)
