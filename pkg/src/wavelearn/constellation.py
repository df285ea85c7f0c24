"""Constellations: normalization, Gray QAM, moments, modulation, JSON I/O.

Point ``i`` carries the K-bit label given by the binary expansion of ``i``
with the most significant bit first (bit ``k = 0`` is the MSB).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = [
    "Constellation",
    "normalize",
    "gray_qam",
    "bit_labels",
    "moments",
    "modulate",
    "modulate_tensor",
    "normalize_tensor",
    "moments_tensor",
    "bits_to_indices",
    "load_json",
    "save_json",
]


@dataclass(frozen=True)
class Constellation:
    points: np.ndarray
    bits_per_symbol_K: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size != 2**self.bits_per_symbol_K:
            raise ValueError(f"expected {2 ** self.bits_per_symbol_K} points, got shape {pts.shape}")

    @property
    def labels(self) -> np.ndarray:
        return bit_labels(self.bits_per_symbol_K)

    def to_dict(self) -> dict:
        return {"K": self.bits_per_symbol_K, "points": [[float(c.real), float(c.imag)] for c in self.points]}

    @classmethod
    def from_dict(cls, doc: dict) -> "Constellation":
        pts = np.asarray(doc["points"], dtype=np.float64)
        return cls(pts[:, 0] + 1j * pts[:, 1], int(doc["K"]))


def bit_labels(K: int) -> np.ndarray:
    """``(2**K, K)`` array; row ``i`` is the MSB-first binary expansion of ``i``."""
    idx = np.arange(2**K)
    return ((idx[:, None] >> np.arange(K - 1, -1, -1)) & 1).astype(np.int8)


def bits_to_indices(bits) -> np.ndarray:
    bits = np.asarray(bits)
    K = bits.shape[-1]
    return (bits.astype(np.int64) << np.arange(K - 1, -1, -1)).sum(axis=-1)


def normalize(raw_points, K: int | None = None) -> Constellation:
    """Scale points to unit mean energy, keeping every point's direction."""
    raw = np.asarray(raw_points, dtype=np.complex128)
    energy = np.mean(np.abs(raw) ** 2)
    if energy == 0:
        raise ValueError("cannot normalize an all-zero point set")
    K = int(np.log2(raw.size)) if K is None else K
    return Constellation(raw / np.sqrt(energy), K)


def _gray(n: int) -> np.ndarray:
    i = np.arange(n)
    return i ^ (i >> 1)


def gray_qam(K: int) -> Constellation:
    """Square 2**K-QAM with per-axis Gray labeling, unit mean energy.

    The first K/2 label bits select the in-phase level, the last K/2 the
    quadrature level.
    """
    if K % 2 or K < 2:
        raise ValueError("square QAM needs an even K >= 2")
    m = 2 ** (K // 2)
    levels = np.arange(-(m - 1), m, 2, dtype=np.float64)
    # gray code g -> level index so that adjacent levels differ in one bit
    pos = np.empty(m, dtype=np.int64)
    pos[_gray(m)] = np.arange(m)
    idx = np.arange(2**K)
    hi, lo = idx >> (K // 2), idx & (m - 1)
    pts = levels[pos[hi]] + 1j * levels[pos[lo]]
    return normalize(pts, K)


def moments(c: Constellation) -> tuple[float, float, float]:
    """``(mu4, mu2, mu2_tilde)`` with ``mu2_tilde = |E[c^2]|^2``."""
    p = c.points
    mu2 = float(np.mean(np.abs(p) ** 2))
    mu4 = float(np.mean(np.abs(p) ** 4))
    m2 = np.mean(p**2)
    return mu4, mu2, float(np.abs(m2) ** 2)


def modulate(bits, c: Constellation) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.shape[-1] != c.bits_per_symbol_K:
        raise ValueError(f"bits must have {c.bits_per_symbol_K} columns, got {bits.shape[-1]}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    return c.points[bits_to_indices(bits)]


# -- differentiable counterparts (points as paired (2**K, 2) tensors) -----------------
def normalize_tensor(raw: Tensor) -> Tensor:
    energy = ad.cabs2(raw).mean()
    return raw / ad.sqrt(energy)


def moments_tensor(points: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    a = ad.cabs2(points)
    mu2 = a.mean()
    mu4 = (a * a).mean()
    m2 = ad.cmul(points, points).mean(axis=0)
    return mu4, mu2, ad.cabs2(m2)


def modulate_tensor(bits, points: Tensor) -> Tensor:
    """Map ``(..., K)`` bits to paired symbols as a one-hot product with ``points``."""
    idx = bits_to_indices(bits)
    onehot = np.eye(points.shape[0])[idx]
    return Tensor(onehot) @ points


def save_json(c: Constellation, path) -> None:
    Path(path).write_text(json.dumps(c.to_dict(), indent=2))


def load_json(path) -> Constellation:
    return Constellation.from_dict(json.loads(Path(path).read_text()))
