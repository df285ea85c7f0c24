"""Residual dilated 1-D CNN detector producing per-bit LLRs.

Layout: pointwise conv ``2 -> F``; ``B`` residual blocks
``x + pointwise(depthwise_dilated(relu(x)))``; pointwise conv ``F -> K``.
All convolutions are zero-padded so the output keeps the block length ``N``.

LLR convention: ``Q(b = 1 | r) = sigmoid(llr)`` — positive values favour bit 1.
The AWGN demapper in :mod:`wavelearn.baseline` uses the opposite orientation;
:func:`to_zero_over_one` converts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = [
    "DetectorConfig",
    "DetectorParams",
    "init_detector",
    "detect",
    "bce_loss",
    "rate_estimate",
    "to_zero_over_one",
    "receptive_field",
]


@dataclass(frozen=True)
class DetectorConfig:
    K: int = 2
    features_F: int = 64
    kernel: int = 3
    dilations: tuple[int, ...] = (1, 2, 4, 8, 16)

    @property
    def blocks_B(self) -> int:
        return len(self.dilations)


def receptive_field(cfg: DetectorConfig) -> int:
    """Minimum block length ``(kernel - 1) * sum(dilations) + 1``."""
    return (cfg.kernel - 1) * sum(cfg.dilations) + 1


@dataclass
class DetectorParams:
    """Ordered detector weights ``gamma``; ``names[i]`` labels ``tensors[i]``."""

    cfg: DetectorConfig
    names: list[str]
    tensors: list[Tensor] = field(repr=False)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[self.names.index(name)]

    @property
    def num_weights(self) -> int:
        return sum(t.data.size for t in self.tensors)

    def to_flat(self) -> np.ndarray:
        return np.concatenate([t.data.ravel() for t in self.tensors])

    def load_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.num_weights:
            raise ValueError(f"expected {self.num_weights} values, got {flat.size}")
        pos = 0
        for t in self.tensors:
            t.data[...] = flat[pos : pos + t.data.size].reshape(t.shape)
            pos += t.data.size

    def layout(self) -> dict:
        return {
            "K": self.cfg.K,
            "features_F": self.cfg.features_F,
            "kernel": self.cfg.kernel,
            "dilations": list(self.cfg.dilations),
            "layers": [{"name": n, "shape": list(t.shape)} for n, t in zip(self.names, self.tensors)],
        }

    @classmethod
    def from_layout(cls, layout: dict, flat=None) -> "DetectorParams":
        cfg = DetectorConfig(layout["K"], layout["features_F"], layout["kernel"], tuple(layout["dilations"]))
        p = init_detector(cfg, np.random.default_rng(0))
        if [list(t.shape) for t in p.tensors] != [layer["shape"] for layer in layout["layers"]]:
            raise ValueError("checkpoint layout does not match the detector architecture")
        if flat is not None:
            p.load_flat(flat)
        return p

    def save(self, stem) -> None:
        """Write ``<stem>.bin`` (little-endian float64) and ``<stem>.json``."""
        stem = Path(stem)
        self.to_flat().astype("<f8").tofile(stem.with_suffix(".bin"))
        stem.with_suffix(".json").write_text(json.dumps(self.layout(), indent=2))

    @classmethod
    def load(cls, stem) -> "DetectorParams":
        stem = Path(stem)
        layout = json.loads(stem.with_suffix(".json").read_text())
        return cls.from_layout(layout, np.fromfile(stem.with_suffix(".bin"), dtype="<f8"))


def _uniform(rng, shape, fan_in: int, gain: float) -> Tensor:
    bound = gain * np.sqrt(3.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def init_detector(cfg: DetectorConfig, rng: np.random.Generator) -> DetectorParams:
    """Kaiming-uniform kernels (fan-in scaling, ReLU gain on hidden layers), zero biases."""
    F, K, k = cfg.features_F, cfg.K, cfg.kernel
    relu_gain = np.sqrt(2.0)
    names: list[str] = []
    tensors: list[Tensor] = []

    def add(name, t):
        names.append(name)
        tensors.append(t)

    add("in.w", _uniform(rng, (F, 2, 1), 2, relu_gain))
    add("in.b", Tensor(np.zeros(F), requires_grad=True))
    for i, _ in enumerate(cfg.dilations):
        add(f"block{i}.dw.w", _uniform(rng, (F, 1, k), k, relu_gain))
        add(f"block{i}.dw.b", Tensor(np.zeros(F), requires_grad=True))
        add(f"block{i}.pw.w", _uniform(rng, (F, F, 1), F, 1.0))
        add(f"block{i}.pw.b", Tensor(np.zeros(F), requires_grad=True))
    add("out.w", _uniform(rng, (K, F, 1), F, 1.0))
    add("out.b", Tensor(np.zeros(K), requires_grad=True))
    return DetectorParams(cfg, names, tensors)


def detect(r, params: DetectorParams) -> Tensor:
    """LLRs of shape ``(M, N, K)`` for received blocks.

    ``r`` is a paired tensor ``(M, N, 2)`` (training path) or a complex array
    ``(N,)`` / ``(M, N)``.
    """
    if not isinstance(r, Tensor):
        z = np.asarray(r, dtype=np.complex128)
        r = Tensor(ad.from_complex(np.atleast_2d(z)))
    M, N, _ = r.shape
    if N < receptive_field(params.cfg):
        raise ValueError(f"block length {N} is below the receptive field {receptive_field(params.cfg)}")
    cfg = params.cfg
    h = ad.conv1d(r.transpose(0, 2, 1), params["in.w"], params["in.b"])
    for i, d in enumerate(cfg.dilations):
        u = ad.relu(h)
        u = ad.conv1d(u, params[f"block{i}.dw.w"], params[f"block{i}.dw.b"], dilation=d, groups=cfg.features_F)
        u = ad.conv1d(u, params[f"block{i}.pw.w"], params[f"block{i}.pw.b"])
        h = h + u
    out = ad.conv1d(h, params["out.w"], params["out.b"])
    return out.transpose(0, 2, 1)


def bce_loss(bits, llrs: Tensor) -> Tensor:
    """Mean over symbols of the summed per-bit cross-entropy, in bits.

    ``bits`` and ``llrs`` have shape ``(M, N, K)``; the result is
    ``-(1/(M N)) sum log2 Q(b | r)`` and lies in ``[0, inf)``.
    """
    b = np.asarray(bits)
    if b.shape != llrs.shape:
        raise ValueError(f"bits {b.shape} and llrs {llrs.shape} differ in shape")
    sign = 2.0 * b - 1.0  # bit 1 -> +1
    per_bit = -ad.log_sigmoid(llrs * sign)
    return per_bit.sum() * (1.0 / (np.log(2.0) * b.shape[0] * b.shape[1]))


def rate_estimate(loss: float, K: int) -> float:
    """``R_hat = K - L``."""
    return K - float(loss)


def to_zero_over_one(llrs) -> np.ndarray:
    """Convert to the ``ln P(0)/P(1)`` orientation used by the AWGN demapper."""
    return -np.asarray(llrs.data if isinstance(llrs, Tensor) else llrs)
