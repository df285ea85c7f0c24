"""``wavelearn`` command line.

Commands: ``train``, ``baseline``, ``export``, ``eval``.  Exit codes: 0 on
success, 2 for configuration/input errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import nullcontext
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import report
from . import rng as rngmod
from .config import RunConfig, load_config
from .errors import ConfigError, NumericalError
from .system import EndToEnd
from .trainer import Trainer

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
EXPORTS = ("psd", "ccdf", "constellation", "signal")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _run_exports(which, out: Path, trainer: Trainer, seed: int) -> list[str]:
    """Each export draws from its own stream so toggling one never changes another."""
    done = []
    cfg, model, params = trainer.cfg, trainer.model, trainer.state.params
    for i, name in enumerate(EXPORTS):
        if name not in which:
            continue
        rng = rngmod.make_streams(seed + 1 + i)["eval"]
        if name == "psd":
            report.export_psd(out / "psd.csv", params, cfg)
        elif name == "ccdf":
            report.export_ccdf(out / "ccdf.csv", model, params, cfg, rng)
        elif name == "constellation":
            report.export_constellation(out / "constellation.json", params)
        else:
            report.export_signal(out / "signal.csv", model, params, cfg, rng)
        done.append(name)
    return done


def cmd_train(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed, "out_dir": args.out_dir})
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "config.resolved.json", cfg.resolved_json())
    trainer = Trainer(cfg, out_dir=out, progress=_log)
    try:
        trainer.run()
    except NumericalError as exc:
        snap = {"error": str(exc), "inner_step": trainer.state.inner_step, "history": trainer.state.history}
        _write(out / "diagnostics.json", report.dump_json(snap))
        trainer.save_checkpoint(out / "diagnostics" / "checkpoint")
        raise
    _write(out / "train_log.csv", trainer.log_csv)
    rep = report.training_report(trainer.model, trainer.state.params, cfg, trainer.state.history,
                                 trainer.state.streams["eval"])
    _write(out / "report.json", report.dump_json(rep))
    ex = cfg.export
    _run_exports([n for n in EXPORTS if getattr(ex, n)], out, trainer, cfg.seed)
    print(report.dump_json(rep), end="")
    return EXIT_OK


def cmd_baseline(args) -> int:
    """Link settings come from ``--config`` (or defaults); explicit flags override them."""
    if not 0.0 <= args.beta < 1.0:
        raise ConfigError("beta must lie in [0, 1)")
    cfg = load_config(args.config, {"seed": args.seed})
    pick = lambda flag, default: default if flag is None else flag  # noqa: E731
    rep = report.baseline_report(
        args.beta,
        pick(args.snr_db, cfg.link.snr_db),
        args.blocks,
        pick(args.duration, cfg.link.D),
        pick(args.bits, cfg.link.bits_per_symbol_K),
        cfg.seed,
        papr_symbols=pick(args.papr_symbols, cfg.evaluation.papr_symbols),
        oversampling=cfg.evaluation.oversampling,
    )
    text = report.dump_json(rep)
    if args.out_dir:
        _write(Path(args.out_dir) / "baseline_report.json", text)
    print(text, end="")
    return EXIT_OK


def _load_trainer(checkpoint) -> Trainer:
    try:
        return Trainer.from_checkpoint(checkpoint)
    except (FileNotFoundError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load checkpoint {checkpoint}: {exc}") from exc


def cmd_export(args) -> int:
    trainer = _load_trainer(args.checkpoint)
    which = EXPORTS if args.what == "all" else (args.what,)
    out = Path(args.out_dir or Path(args.checkpoint).parent / "exports")
    out.mkdir(parents=True, exist_ok=True)
    seed = trainer.cfg.seed if args.seed is None else args.seed
    done = _run_exports(which, out, trainer, seed)
    print(json.dumps({"exported": done}))
    return EXIT_OK


def cmd_eval(args) -> int:
    trainer = _load_trainer(args.checkpoint)
    doc = json.loads(trainer.cfg.model_dump_json())
    if args.snr_db is not None:
        doc["link"]["snr_db"] = args.snr_db
    cfg = RunConfig.model_validate(doc)
    model = EndToEnd(cfg)
    seed = cfg.seed if args.seed is None else args.seed
    rate, stderr = report.evaluate_rate(model, trainer.state.params, rngmod.make_streams(seed)["eval"], args.blocks)
    rep = {"snr_db": cfg.link.snr_db, "rate": rate, "rate_stderr": stderr, "blocks": args.blocks, "seed": seed}
    text = report.dump_json(rep)
    if args.out_dir:
        _write(Path(args.out_dir) / "eval_report.json", text)
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavelearn", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="64-bit seed (overrides the config)")
    common.add_argument("--out-dir", default=None, help="output directory")
    common.add_argument("--threads", type=int, default=None, help="cap BLAS/OpenMP worker threads")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[common], help="run augmented-Lagrangian training")
    t.add_argument("--config", default=None, help="JSON run config (defaults if omitted)")
    t.set_defaults(func=cmd_train)

    b = sub.add_parser("baseline", parents=[common], help="benchmark the windowed-RRC/QAM link")
    b.add_argument("--config", default=None, help="JSON run config supplying link defaults")
    b.add_argument("--beta", type=float, default=0.0)
    b.add_argument("--snr-db", type=float, default=None)
    b.add_argument("--blocks", type=int, default=200)
    b.add_argument("--duration", type=float, default=None, help="filter duration D in symbol periods")
    b.add_argument("--bits", type=int, default=None, help="bits per symbol K (square QAM)")
    b.add_argument("--papr-symbols", type=int, default=None)
    b.set_defaults(func=cmd_baseline)

    e = sub.add_parser("export", parents=[common], help="write PSD/CCDF/constellation/signal files")
    e.add_argument("checkpoint", help="checkpoint directory (contains state.json)")
    e.add_argument("--what", choices=(*EXPORTS, "all"), default="all")
    e.set_defaults(func=cmd_export)

    v = sub.add_parser("eval", parents=[common], help="rate of a checkpoint at any SNR")
    v.add_argument("checkpoint")
    v.add_argument("--snr-db", type=float, default=None)
    v.add_argument("--blocks", type=int, default=200)
    v.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    limit = threadpool_limits(args.threads) if args.threads else nullcontext()
    try:
        with limit:
            return args.func(args)
    except ConfigError as exc:
        _log(f"configuration error: {exc}")
        return EXIT_CONFIG
    except NumericalError as exc:
        _log(f"numerical failure: {exc}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
