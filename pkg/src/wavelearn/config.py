"""Validated run configuration.

Defaults reproduce the full-scale evaluation scenario (W = 5 MHz, D = 32T,
S = 100, N = 990, 16QAM, SNR 10 dB, M = 10, learning rate 1e-3).  Time is
measured in symbol periods internally (``T = 1``); ``bandwidth_hz`` only
labels frequency axes of exported spectra.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError

__all__ = ["LinkConfig", "TrainConfig", "DetectorSettings", "ExportConfig", "RunConfig", "load_config"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LinkConfig(_Strict):
    block_length_N: int = Field(990, ge=1)
    half_size_S: int = Field(100, ge=0)
    duration_D_over_T: float = Field(32.0, gt=0)
    bits_per_symbol_K: int = Field(4, ge=1)
    snr_db: float = 10.0
    bandwidth_hz: float = Field(5e6, gt=0)

    @property
    def N0(self) -> float:
        return 10 ** (-self.snr_db / 10)

    @property
    def D(self) -> float:
        return self.duration_D_over_T


class DetectorSettings(_Strict):
    features_F: int = Field(64, ge=1)
    kernel: int = Field(3, ge=1)
    dilations: tuple[int, ...] = (1, 2, 4, 8, 16)

    @model_validator(mode="after")
    def _odd_kernel(self):
        if self.kernel % 2 == 0:
            raise ValueError("kernel must be odd")
        if any(d < 1 for d in self.dilations):
            raise ValueError("dilations must be positive")
        return self


class TrainConfig(_Strict):
    eps_A: float = Field(1e-3, gt=0)
    eps_V: float = Field(1.0, ge=0)
    batch_M: int = Field(10, ge=1)
    learning_rate: float = Field(1e-3, ge=0)
    inner_steps: int = Field(500, ge=0)
    outer_iters: int = Field(30, ge=1)
    eta0: float = Field(1e-2, gt=0)
    eta_factor: float = Field(1.2, gt=1.0)
    lambda_A0: float = 0.0
    lambda_V0: float = 0.0
    early_stop_tol: float = Field(1e-4, ge=0)
    early_stop_patience: int = Field(3, ge=1)
    constraint_scaling: Literal["raw", "relative"] = "relative"
    v_grid_G: int = Field(129, ge=1)
    log_every: int = Field(50, ge=1)


class ExportConfig(_Strict):
    psd: bool = True
    ccdf: bool = True
    constellation: bool = True
    signal: bool = True
    psd_points: int = Field(2001, ge=3)
    psd_span_over_W: float = Field(4.0, gt=0)
    signal_symbols: int = Field(64, ge=1)


class EvalConfig(_Strict):
    rate_blocks: int = Field(200, ge=2)
    papr_symbols: int = Field(100_000, ge=1)
    oversampling: int = Field(16, ge=4)


class RunConfig(_Strict):
    link: LinkConfig = LinkConfig()
    train: TrainConfig = TrainConfig()
    detector: DetectorSettings = DetectorSettings()
    export: ExportConfig = ExportConfig()
    evaluation: EvalConfig = EvalConfig()
    seed: int = Field(0, ge=0, lt=2**64)
    out_dir: str = "runs/default"

    def resolved_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read a JSON config (or defaults), apply top-level overrides, validate.

    Raises :class:`~wavelearn.errors.ConfigError` for unreadable files,
    unknown keys or invalid values.
    """
    doc: dict = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
