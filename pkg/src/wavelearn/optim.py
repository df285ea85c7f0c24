"""Adam on :class:`~wavelearn.autodiff.Tensor` parameters."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .autodiff import Tensor


class Adam:
    """Adam with bias correction.

    Parameters are updated in place from their ``.grad`` fields; a parameter
    whose gradient is ``None`` is treated as having zero gradient.
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = np.zeros_like(p.data) if p.grad is None else p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.m + self.v])

    def load_state_flat(self, flat: np.ndarray, t: int) -> None:
        pos = 0
        for a in self.m + self.v:
            a[...] = flat[pos : pos + a.size].reshape(a.shape)
            pos += a.size
        if pos != flat.size:
            raise ValueError("optimizer state size mismatch")
        self.t = int(t)
