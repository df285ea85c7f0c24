"""Evaluation of trained systems and metric exports.

Reports contain no timestamps or paths, so identical inputs give
byte-identical JSON.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import baseline as bl
from . import constellation as cst
from . import detector as det
from . import envelope as env
from . import rng as rngmod
from .config import RunConfig
from .sinc_filter import FilterParams
from .system import EndToEnd, SystemParams

__all__ = [
    "evaluate_rate",
    "render_learned",
    "training_report",
    "baseline_report",
    "export_psd",
    "export_ccdf",
    "export_constellation",
    "export_signal",
    "dump_json",
]

PAPR_ESTIMATOR = "max/mean of |x|^2 over the steady-state region (>= D/2 from both edges)"


def dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


def evaluate_rate(model: EndToEnd, params: SystemParams, rng: np.random.Generator, blocks: int,
                  batch: int = 10) -> tuple[float, float]:
    """``R_hat = K - L`` on fresh blocks; returns ``(mean, standard error across blocks)``."""
    per_block = []
    done = 0
    while done < blocks:
        m = min(batch, blocks - done)
        bits, noise = model.draw_batch(rng, rng, m)
        r = model.received(params, bits, noise)
        llr = det.detect(r, params.detector).data
        sign = 2.0 * bits - 1.0
        bce = np.logaddexp(0.0, -sign * llr).sum(axis=(1, 2)) / (np.log(2.0) * model.N)
        per_block.extend(model.K - bce)
        done += m
    rates = np.asarray(per_block)
    return float(rates.mean()), float(rates.std(ddof=1) / np.sqrt(rates.size))


def render_learned(model: EndToEnd, params: SystemParams, rng: np.random.Generator, n_symbols: int,
                   oversampling: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Random waveform of the learned transmitter; returns ``(t, x, steady_state_mask)``."""
    c = params.constellation()
    s = c.points[rng.integers(0, c.points.size, size=n_symbols)]
    f = FilterParams(params.theta_c, model.D, "tx")
    t, x = env.render_signal(s, f, model.D, oversampling)
    return t, x, env.steady_state_mask(t, n_symbols, model.D)


def training_report(model: EndToEnd, params: SystemParams, cfg: RunConfig, history: list,
                    eval_rng: np.random.Generator) -> dict:
    ev = cfg.evaluation
    rate, stderr = evaluate_rate(model, params, eval_rng, ev.rate_blocks, cfg.train.batch_M)
    aclr = model.aclr(params)
    V = model.ped_variance(params)
    _, x, mask = render_learned(model, params, eval_rng, ev.papr_symbols, ev.oversampling)
    return {
        "rate": rate,
        "rate_stderr": stderr,
        "rate_blocks": ev.rate_blocks,
        "aclr": aclr,
        "aclr_db": 10 * math.log10(aclr),
        "V": V,
        "papr_db": env.papr_db(x, mask),
        "papr_estimator": {"definition": PAPR_ESTIMATOR, "symbols": ev.papr_symbols, "oversampling": ev.oversampling},
        "residual_aclr": aclr - cfg.train.eps_A,
        "residual_aclr_db": 10 * math.log10(aclr) - 10 * math.log10(cfg.train.eps_A),
        "residual_V": V - cfg.train.eps_V,
        "outer_iterations": len(history),
        "eta": [h["eta_used"] for h in history],
        "lambda_A": history[-1]["lambda_A"] if history else cfg.train.lambda_A0,
        "lambda_V": history[-1]["lambda_V"] if history else cfg.train.lambda_V0,
        "snr_db": cfg.link.snr_db,
        "seed": cfg.seed,
    }


def baseline_report(beta: float, snr_db: float, blocks: int, D: float, K: int, seed: int,
                    papr_symbols: int = 100_000, oversampling: int = 16, block_len: int = 128) -> dict:
    streams = rngmod.make_streams(seed)
    spec = bl.RrcSpec(beta, D)
    c = cst.gray_qam(K)
    N0 = 10 ** (-snr_db / 10)
    est = bl.baseline_rate(spec, c, N0, blocks, block_len, streams["eval"])
    papr, _, _ = bl.baseline_papr(spec, c, papr_symbols, oversampling, streams["bits"])
    q = bl.baseline_link_quantities(spec)
    return {
        "beta": beta,
        "D_over_T": D,
        "K": K,
        "snr_db": snr_db,
        "rate": est.rate,
        "stderr": est.stderr,
        "blocks": blocks,
        "aclr_db": q.aclr_db,
        "papr_db": papr,
        "papr_estimator": {"definition": PAPR_ESTIMATOR, "symbols": papr_symbols, "oversampling": oversampling},
        "seed": seed,
    }


# -- exports -------------------------------------------------------------------------------
def export_psd(path, params: SystemParams, cfg: RunConfig) -> None:
    """Energy spectral density in dB/Hz; integrates (over Hz) to unit energy."""
    ex, W_hz = cfg.export, cfg.link.bandwidth_hz
    f = np.linspace(-ex.psd_span_over_W / 2, ex.psd_span_over_W / 2, ex.psd_points)  # units of W = 1/T
    _, db = env.psd(FilterParams(params.theta_c, cfg.link.D, "tx"), f)
    env.write_psd_csv(path, f * W_hz, db - 10 * np.log10(W_hz))


def export_ccdf(path, model: EndToEnd, params: SystemParams, cfg: RunConfig, rng) -> None:
    _, x, mask = render_learned(model, params, rng, cfg.evaluation.papr_symbols, cfg.evaluation.oversampling)
    thr, prob = env.npd_ccdf(x, mask)
    env.write_ccdf_csv(path, thr, prob)


def export_constellation(path, params: SystemParams) -> None:
    cst.save_json(params.constellation(), path)


def export_signal(path, model: EndToEnd, params: SystemParams, cfg: RunConfig, rng) -> None:
    """Oversampled ``(time_s, re, im)`` samples of a short random transmission."""
    t, x, _ = render_learned(model, params, rng, cfg.export.signal_symbols, cfg.evaluation.oversampling)
    T_s = 1.0 / cfg.link.bandwidth_hz
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "re", "im"])
        for ti, xi in zip(t, x):
            w.writerow([repr(float(ti * T_s)), repr(float(xi.real)), repr(float(xi.imag))])

