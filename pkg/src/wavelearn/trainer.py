"""Augmented-Lagrangian training loop.

Each outer iteration ``u`` runs a fixed number of Adam steps on

    L_A = L - lambda_V (V - eps_V) - lambda_A (ACLR - eps_A)
          + eta/2 [(V - eps_V)^2 + (ACLR - eps_A)^2],

then updates ``lambda <- lambda - eta * residual`` from the exact (closed
form) constraint values and grows ``eta`` by a constant factor.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import rng as rngmod
from .autodiff import Tensor
from .config import RunConfig, TrainConfig
from .errors import NumericalError
from .optim import Adam
from .system import EndToEnd, SystemParams

__all__ = [
    "augmented_lagrangian",
    "update_multipliers",
    "scaled_constraints",
    "TrainState",
    "Trainer",
    "LOG_COLUMNS",
    "solve_toy_problem",
]

LOG_COLUMNS = ("step", "loss", "rate", "aclr_db", "V", "lambda_A", "lambda_V", "eta")


def augmented_lagrangian(loss, aclr, V, lambda_A, lambda_V, eta, eps_A, eps_V):
    """``L - lambda_V (V - eps_V) - lambda_A (ACLR - eps_A) + eta/2 [(V - eps_V)^2 + (ACLR - eps_A)^2]``.

    Works for floats and :class:`~wavelearn.autodiff.Tensor` operands alike.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    rv = V - eps_V
    ra = aclr - eps_A
    return loss - rv * lambda_V - ra * lambda_A + (rv * rv + ra * ra) * (0.5 * eta)


def update_multipliers(lambda_A: float, lambda_V: float, eta: float, res_A: float, res_V: float):
    """Dual ascent step ``lambda <- lambda - eta * residual``."""
    return lambda_A - eta * res_A, lambda_V - eta * res_V


def scaled_constraints(aclr, V, cfg: TrainConfig):
    """Constraint values and targets as fed to :func:`augmented_lagrangian`.

    ``"raw"`` uses ``(ACLR, eps_A)`` and ``(V, eps_V)`` as is.  ``"relative"``
    divides each by its target, i.e. it enforces ``ACLR / eps_A = 1`` and
    ``V / eps_V = 1`` — the same feasible set, better-conditioned duals.
    """
    if cfg.constraint_scaling == "raw":
        return aclr, cfg.eps_A, V, cfg.eps_V
    sv = 1.0 / cfg.eps_V if cfg.eps_V > 0 else 1.0
    return aclr * (1.0 / cfg.eps_A), 1.0, V * sv, cfg.eps_V * sv


@dataclass
class TrainState:
    params: SystemParams
    optimizer: Adam
    streams: dict
    lambda_A: float
    lambda_V: float
    eta: float
    outer_iter_u: int = 0
    inner_step: int = 0
    converged_streak: int = 0
    history: list = field(default_factory=list)  # one dict per outer iteration


class Trainer:
    """Owns the model matrices, the state and the artifact writers for one run."""

    def __init__(self, cfg: RunConfig, out_dir: Path | None = None, progress: Callable[[str], None] | None = None):
        self.cfg = cfg
        self.model = EndToEnd(cfg)
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.progress = progress or (lambda msg: None)
        streams = rngmod.make_streams(cfg.seed)
        params = self.model.init_params(streams["init"])
        tc = cfg.train
        self.state = TrainState(
            params=params,
            optimizer=Adam(params.tensors(), lr=tc.learning_rate),
            streams=streams,
            lambda_A=tc.lambda_A0,
            lambda_V=tc.lambda_V0,
            eta=tc.eta0,
        )
        self._log = io.StringIO()
        self._log_writer = csv.writer(self._log, lineterminator="\n")
        self._log_writer.writerow(LOG_COLUMNS)

    # -- single steps
    def objective(self, bits, noise):
        s, tc = self.state, self.cfg.train
        fwd = self.model.forward(s.params, bits, noise)
        a, ea, v, ev = scaled_constraints(fwd.aclr, fwd.V, tc)
        la = augmented_lagrangian(fwd.loss, a, v, s.lambda_A, s.lambda_V, s.eta, ea, ev)
        return la, fwd

    def inner_sgd_step(self, bits=None, noise=None) -> dict:
        """One Adam update on ``L_A`` for a fresh (or given) batch."""
        s, tc = self.state, self.cfg.train
        if bits is None:
            bits, noise = self.model.draw_batch(s.streams["bits"], s.streams["noise"], tc.batch_M)
        s.optimizer.zero_grad()
        la, fwd = self.objective(bits, noise)
        values = dict(loss=fwd.loss.item(), aclr=fwd.aclr.item(), V=fwd.V.item(), objective=la.item())
        if not all(math.isfinite(x) for x in values.values()):
            raise NumericalError(f"non-finite training values at step {s.inner_step}: {values}")
        la.backward()
        s.optimizer.step()
        s.inner_step += 1
        return values

    def _log_row(self, values: dict) -> None:
        s = self.state
        K = self.model.K
        row = (
            s.inner_step,
            values["loss"],
            K - values["loss"],
            10 * math.log10(values["aclr"]) if values["aclr"] > 0 else float("-inf"),
            values["V"],
            s.lambda_A,
            s.lambda_V,
            s.eta,
        )
        self._log_writer.writerow([row[0]] + [repr(float(x)) for x in row[1:]])

    def outer_step(self) -> dict:
        """Inner Adam loop, then exact-constraint multiplier update and ``eta`` growth."""
        s, tc = self.state, self.cfg.train
        values = None
        for i in range(tc.inner_steps):
            values = self.inner_sgd_step()
            if (i + 1) % tc.log_every == 0 or i + 1 == tc.inner_steps:
                self._log_row(values)
        aclr = self.model.aclr(s.params)
        V = self.model.ped_variance(s.params)
        a, ea, v, ev = scaled_constraints(aclr, V, tc)
        s.lambda_A, s.lambda_V = update_multipliers(s.lambda_A, s.lambda_V, s.eta, a - ea, v - ev)
        if not (math.isfinite(s.lambda_A) and math.isfinite(s.lambda_V)):
            raise NumericalError("multipliers became non-finite")
        record = {
            "u": s.outer_iter_u,
            "inner_step": s.inner_step,
            "loss": values["loss"] if values else float("nan"),
            "aclr": aclr,
            "aclr_db": 10 * math.log10(aclr),
            "V": V,
            "res_A": aclr - tc.eps_A,
            "res_V": V - tc.eps_V,
            "lambda_A": s.lambda_A,
            "lambda_V": s.lambda_V,
            "eta_used": s.eta,
        }
        s.history.append(record)
        s.eta *= tc.eta_factor
        s.outer_iter_u += 1
        ok = abs(record["res_A"]) < tc.early_stop_tol and abs(record["res_V"]) < tc.early_stop_tol
        s.converged_streak = s.converged_streak + 1 if ok else 0
        self.progress(
            f"outer {record['u']}: loss={record['loss']:.4f} aclr_db={record['aclr_db']:.2f} "
            f"V={V:.4f} lambda_A={s.lambda_A:.4g} lambda_V={s.lambda_V:.4g}"
        )
        return record

    def run(self) -> TrainState:
        tc = self.cfg.train
        while self.state.outer_iter_u < tc.outer_iters:
            self.outer_step()
            if self.out_dir is not None:
                self.save_checkpoint(self.out_dir / "checkpoint")
            if self.state.converged_streak >= tc.early_stop_patience:
                self.progress("constraints met for consecutive iterations; stopping early")
                break
        return self.state

    # -- artifacts
    @property
    def log_csv(self) -> str:
        return self._log.getvalue()

    def save_checkpoint(self, directory: Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        s = self.state
        s.params.to_flat().astype("<f8").tofile(directory / "params.bin")
        s.optimizer.state_flat().astype("<f8").tofile(directory / "optimizer.bin")
        meta = {
            "format": "wavelearn-checkpoint-1",
            "config": json.loads(self.cfg.resolved_json()),
            "u": s.outer_iter_u,
            "inner_step": s.inner_step,
            "lambda_A": s.lambda_A,
            "lambda_V": s.lambda_V,
            "eta": s.eta,
            "adam_t": s.optimizer.t,
            "converged_streak": s.converged_streak,
            "history": s.history,
            "detector_layout": s.params.detector.layout(),
            "rng_states": rngmod.generator_states(s.streams),
        }
        (directory / "state.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        (directory / "train_log.csv").write_text(self.log_csv, encoding="utf-8")

    @classmethod
    def from_checkpoint(cls, directory, progress=None) -> "Trainer":
        from .config import RunConfig as _RC

        directory = Path(directory)
        meta = _read_state(directory)
        cfg = _RC.model_validate(meta["config"])
        tr = cls(cfg, progress=progress)
        s = tr.state
        s.params.load_flat(_read_bin(directory / "params.bin"))
        s.optimizer.load_state_flat(_read_bin(directory / "optimizer.bin"), meta["adam_t"])
        s.lambda_A, s.lambda_V, s.eta = meta["lambda_A"], meta["lambda_V"], meta["eta"]
        s.outer_iter_u, s.inner_step = meta["u"], meta["inner_step"]
        s.converged_streak = meta["converged_streak"]
        s.history = meta["history"]
        rngmod.restore_states(s.streams, meta["rng_states"])
        log = directory / "train_log.csv"
        if log.exists():
            tr._log = io.StringIO()
            tr._log.write(log.read_text(encoding="utf-8"))
            tr._log_writer = csv.writer(tr._log, lineterminator="\n")
        return tr


def _read_state(directory: Path) -> dict:
    try:
        meta = json.loads((directory / "state.json").read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise FileNotFoundError(f"missing or corrupt checkpoint in {directory}: {exc}") from exc
    if meta.get("format") != "wavelearn-checkpoint-1":
        raise ValueError(f"unrecognized checkpoint format in {directory}")
    return meta


def _read_bin(path: Path) -> np.ndarray:
    if not path.exists():
        raise FileNotFoundError(f"missing checkpoint file {path}")
    return np.fromfile(path, dtype="<f8")


# -- analytic toy problem ------------------------------------------------------------------
def solve_toy_problem(a, outer_iters: int = 50, inner_steps: int = 500, lr: float = 1e-2,
                      eta0: float = 1e-2, eta_factor: float = 1.2, x0=None) -> dict:
    """``min ||x - a||^2  s.t.  ||x||^2 = 1`` with the same dual machinery and Adam.

    The KKT point is ``x* = a / ||a||`` with multiplier ``lambda* = 1 - ||a||``
    (for ``L_A = f - lambda h``, stationarity gives ``2(x - a) = 2 lambda x``).
    """
    a = np.asarray(a, dtype=np.float64)
    x = Tensor(np.zeros_like(a) + 0.5 if x0 is None else np.array(x0, dtype=np.float64), requires_grad=True)
    opt = Adam([x], lr=lr)
    lam, eta = 0.0, eta0
    at = Tensor(a)
    for _ in range(outer_iters):
        for _ in range(inner_steps):
            opt.zero_grad()
            d = x - at
            h = (x * x).sum()
            obj = augmented_lagrangian((d * d).sum(), 0.0, h, 0.0, lam, eta, 0.0, 1.0)
            obj.backward()
            opt.step()
        lam = lam - eta * (float(np.sum(x.data**2)) - 1.0)
        eta *= eta_factor
    return {"x": x.data.copy(), "lambda": lam, "x_star": a / np.linalg.norm(a), "lambda_star": 1 - np.linalg.norm(a)}
