"""Finite-difference check of the augmented-Lagrangian gradients (shared by two test files)."""

import numpy as np

from wavelearn import autodiff as ad
from wavelearn.config import DetectorSettings, LinkConfig, RunConfig
from wavelearn.trainer import Trainer

GRAD_CONFIG = RunConfig(
    link=LinkConfig(block_length_N=64, half_size_S=8, duration_D_over_T=8, bits_per_symbol_K=2),
    detector=DetectorSettings(features_F=16),
)


def lagrangian_gradient_errors(n_detector: int = 50, seed: int = 0, cfg: RunConfig = GRAD_CONFIG) -> dict:
    """Relative error ``||g_tape - g_fd|| / ||g_fd||`` per parameter group.

    Multipliers and penalty are set away from zero so the constraint terms
    contribute to every gradient.
    """
    rng = np.random.default_rng(seed)
    tr = Trainer(cfg)
    s = tr.state
    s.lambda_A, s.lambda_V, s.eta = -0.4, 0.25, 1.3
    # move off the symmetric initial point so no gradient vanishes by construction
    for t in (s.params.theta, s.params.psi, s.params.raw_points):
        t.data += 0.05 * rng.normal(size=t.shape)
    bits, noise = tr.model.draw_batch(rng, rng, 2)

    def value() -> float:
        return tr.objective(bits, noise)[0].item()

    s.optimizer.zero_grad()
    tr.objective(bits, noise)[0].backward()
    errors = {}
    for name, t in (("theta", s.params.theta), ("psi", s.params.psi), ("points", s.params.raw_points)):
        num = ad.numerical_grad(value, t)
        errors[name] = float(np.linalg.norm(t.grad - num) / np.linalg.norm(num))

    dets = s.params.detector.tensors
    sizes = np.array([t.data.size for t in dets])
    picks = rng.choice(sizes.sum(), size=n_detector, replace=False)
    owner = np.searchsorted(np.cumsum(sizes), picks, side="right")
    offset = picks - np.concatenate([[0], np.cumsum(sizes)[:-1]])[owner]
    tape, fd = [], []
    for k, i in zip(owner, offset):
        t = dets[k]
        tape.append(t.grad.reshape(-1)[i])
        fd.append(ad.numerical_grad(value, t, index=[i])[0])
    tape, fd = np.asarray(tape), np.asarray(fd)
    errors["detector"] = float(np.linalg.norm(tape - fd) / np.linalg.norm(fd))
    return errors
