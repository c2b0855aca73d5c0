"""Command-line surface.

Subcommands: ``synth``, ``train``, ``eval``, ``ablate``, ``report``.
Exit codes: 0 success, 2 config error, 3 data error, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional

from .config import EVAL_MODES, RunConfig
from .errors import ConfigError, DataError, DivergenceError
from .evaluate import ablate, evaluate_checkpoint
from .report import render_report_dir, write_reports
from .session_io import save_dataset
from .synth import synth_dataset
from .train import train


def _load_config(path: Optional[str]) -> RunConfig:
    return RunConfig.from_file(path) if path else RunConfig()


def cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    out = args.out or str(cfg.get("data.root"))
    sessions = synth_dataset(
        n_subjects=int(cfg.get("synth.n_subjects")),
        sessions_per_subject=int(cfg.get("synth.sessions_per_subject")),
        base=cfg.synth_config(),
        seed=int(cfg.get("synth.seed")),
        hr_range=(float(cfg.get("synth.hr_lo")), float(cfg.get("synth.hr_hi"))),
    )
    save_dataset(sessions, out)
    print(f"wrote {len(sessions)} sessions to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    result = train(cfg)
    last = result.history[-1] if result.history else {}
    print(f"checkpoint: {result.checkpoint_path}")
    if last:
        print(f"final epoch {last['epoch']}: train {last['train']:.4f} "
              f"val {last['val']:.4f}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    report = evaluate_checkpoint(cfg, args.ckpt, mode=args.mode)
    out_dir = str(cfg.get("run.out_dir"))
    os.makedirs(out_dir, exist_ok=True)
    path = report.save(os.path.join(out_dir, f"{report.label}.report.json"))
    m = report.metrics
    print(f"mode={report.mode} sessions={m.count} MAE={m.mae:.3f} RMSE={m.rmse:.3f} "
          f"rho={'undef' if m.rho is None else f'{m.rho:.3f}'}")
    print(f"report: {path}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_config(args.config)
    toggles = [t.strip() for t in args.toggles.split(",") if t.strip()] if args.toggles else None
    reports = ablate(cfg, toggles=toggles)
    out_dir = str(cfg.get("run.out_dir"))
    for label, report in reports.items():
        report.save(os.path.join(out_dir, f"{label}.report.json"))
    files = write_reports(list(reports.values()), out_dir)
    print(f"ablation reports: {', '.join(sorted(reports))}")
    print(f"wrote {len(files)} files to {out_dir}")
    return 0


def cmd_report(args) -> int:
    files = render_report_dir(args.in_dir, args.out_dir)
    print(f"wrote {len(files)} files to {args.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulsefusion",
        description="RGB + RF fusion pipeline for remote heart-rate estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic paired dataset")
    p.add_argument("--config", help="path to a key = value config file")
    p.add_argument("--out", help="output dataset root (default: data.root)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train on the configured dataset")
    p.add_argument("--config", help="path to a key = value config file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--config", help="path to a key = value config file")
    p.add_argument("--ckpt", required=True, help="checkpoint path")
    p.add_argument("--mode", choices=EVAL_MODES, default=None,
                   help="input modalities at test time")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and evaluate single-toggle variants")
    p.add_argument("--config", help="path to a key = value config file")
    p.add_argument("--toggles", help="comma-separated toggle names "
                                     "(default: all five)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="render tables and figures from reports")
    p.add_argument("--in", dest="in_dir", required=True, help="directory of *.report.json")
    p.add_argument("--out", dest="out_dir", required=True, help="output directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
