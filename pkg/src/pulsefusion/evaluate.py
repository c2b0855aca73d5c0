"""Evaluation protocols: full and missing-modality inference, per-session
heart-rate readout, fairness breakdowns, and the single-toggle ablation
harness."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch

from .config import EVAL_MODES, RunConfig
from .errors import ConfigError, NoPeakError
from .metrics import BlandAltman, MetricsReport, bland_altman, compute_metrics, estimate_hr
from .model import ABLATION_TOGGLES, FusionNet
from .session_io import load_dataset
from .splits import Folds, split_dataset
from .synth import Session
from .train import load_checkpoint, session_tensors, train

TRACE_SESSIONS = 3
HR_TRACE_WINDOW_S = 6.0
HR_TRACE_STRIDE_S = 1.0


@dataclass
class EvalReport:
    """Per-session estimates plus aggregate metrics for one evaluation run."""

    label: str
    mode: str
    records: List[dict]
    metrics: MetricsReport
    bland: Optional[BlandAltman]
    toggles: Dict[str, bool]
    traces: Dict[str, dict] = field(default_factory=dict)
    config: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "mode": self.mode,
            "records": self.records,
            "metrics": self.metrics.to_dict(),
            "bland_altman": self.bland.to_dict() if self.bland is not None else None,
            "toggles": dict(sorted(self.toggles.items())),
            "traces": self.traces,
            "config": self.config,
        }

    def save(self, path: str) -> str:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, sort_keys=True, indent=1)
            f.write("\n")
        return path


def load_report(path: str) -> EvalReport:
    with open(path, "r") as f:
        d = json.load(f)
    metrics = d["metrics"]
    from .metrics import GroupMetrics
    report = MetricsReport(
        mae=metrics["mae"], rmse=metrics["rmse"], rho=metrics["rho"],
        count=metrics["count"],
        per_group={g: GroupMetrics(**m) for g, m in metrics["per_group"].items()},
        delta_mae=metrics.get("delta_mae"), delta_rmse=metrics.get("delta_rmse"),
        delta_rho=metrics.get("delta_rho"))
    ba = d["bland_altman"]
    bland = None
    if ba is not None:
        bland = BlandAltman(means=np.asarray(ba["means"]), diffs=np.asarray(ba["diffs"]),
                            bias=ba["bias"], sd=ba["sd"], loa_low=ba["loa_low"],
                            loa_high=ba["loa_high"])
    return EvalReport(label=d["label"], mode=d["mode"], records=d["records"],
                      metrics=report, bland=bland, toggles=d["toggles"],
                      traces=d.get("traces", {}), config=d.get("config", {}))


def _hr_trace(samples: np.ndarray, fs: float, band) -> List[dict]:
    win = min(int(HR_TRACE_WINDOW_S * fs), samples.shape[0])
    if win < int(2.0 * fs):
        return []
    stride = max(1, int(HR_TRACE_STRIDE_S * fs))
    points = []
    for start in range(0, max(1, samples.shape[0] - win + 1), stride):
        chunk = samples[start:start + win]
        if chunk.shape[0] < win:
            break
        try:
            hr = estimate_hr(chunk, fs, band)
        except NoPeakError:
            hr = float("nan")
        points.append({"t": (start + win / 2.0) / fs, "bpm": hr})
    return points


def predict_session(model: FusionNet, session: Session, mode: str) -> np.ndarray:
    """Run inference on one full session, zero-filling the missing modality at
    the raw-input stage for the reduced modes."""
    video, rf, _ = session_tensors(session)
    frames = video.shape[1] - video.shape[1] % 2
    video = video[:, :frames]
    rf = rf[:, : 2 * frames]
    if mode == "rgb_only":
        rf = torch.zeros_like(rf)
    elif mode == "rf_only":
        video = torch.zeros_like(video)
    model.eval()
    with torch.no_grad():
        pred = model(video.unsqueeze(0), rf.unsqueeze(0))[0]
    return pred.numpy().astype(np.float64)


def evaluate(cfg: RunConfig, model: FusionNet, sessions: Sequence[Session],
             mode: Optional[str] = None, label: Optional[str] = None) -> EvalReport:
    mode = mode or str(cfg.get("eval.mode"))
    if mode not in EVAL_MODES:
        raise ConfigError(f"eval mode must be one of {EVAL_MODES}, got {mode!r}")
    band = (float(cfg.get("eval.band_lo")), float(cfg.get("eval.band_hi")))
    hr_window_s = float(cfg.get("eval.hr_window_s"))
    records: List[dict] = []
    window_pred: List[float] = []
    window_gt: List[float] = []
    window_groups: List[str] = []
    traces: Dict[str, dict] = {}
    for session in sessions:
        pred = predict_session(model, session, mode)
        fs = session.video.fps
        gt_bpm = estimate_hr(session.ppg_gt, band=band)
        degenerate = False
        try:
            pred_bpm = estimate_hr(pred, fs, band)
        except NoPeakError:
            # A flat prediction carries no rate information; report the band
            # floor and flag the session rather than fail the whole protocol.
            pred_bpm = 60.0 * band[0]
            degenerate = True
        records.append({
            "session_id": session.session_id, "subject_id": session.subject_id,
            "group": session.skin_tone, "gt_bpm": gt_bpm, "pred_bpm": pred_bpm,
            "degenerate": degenerate,
        })
        if hr_window_s > 0:
            win = int(hr_window_s * fs)
            for start in range(0, pred.shape[0] - win + 1, win):
                try:
                    window_pred.append(estimate_hr(pred[start:start + win], fs, band))
                    window_gt.append(estimate_hr(
                        session.ppg_gt.samples[start:start + win], fs, band))
                    window_groups.append(session.skin_tone)
                except NoPeakError:
                    continue
        if len(traces) < TRACE_SESSIONS:
            key = f"{session.subject_id}/{session.session_id}"
            traces[key] = {
                "fps": fs,
                "gt_bvp": [float(v) for v in session.ppg_gt.samples],
                "pred_bvp": [float(v) for v in pred],
                "hr_gt": _hr_trace(session.ppg_gt.samples, fs, band),
                "hr_pred": _hr_trace(pred, fs, band),
            }
    if hr_window_s > 0 and window_pred:
        metrics = compute_metrics(window_pred, window_gt, window_groups)
    else:
        metrics = compute_metrics([r["pred_bpm"] for r in records],
                                  [r["gt_bpm"] for r in records],
                                  [r["group"] for r in records])
    ba = None
    if len(records) >= 2:
        ba = bland_altman([r["pred_bpm"] for r in records],
                          [r["gt_bpm"] for r in records])
    toggles = {t: bool(cfg.get(f"model.use_{t}")) for t in ABLATION_TOGGLES}
    return EvalReport(label=label or mode, mode=mode, records=records, metrics=metrics,
                      bland=ba, toggles=toggles, traces=traces, config=cfg.to_flat())


def evaluate_checkpoint(cfg: RunConfig, ckpt_path: str, mode: Optional[str] = None,
                        sessions: Optional[Sequence[Session]] = None,
                        label: Optional[str] = None) -> EvalReport:
    model = load_checkpoint(ckpt_path, cfg)
    if sessions is None:
        sessions = _fold_sessions(cfg)
    return evaluate(cfg, model, sessions, mode=mode, label=label)


def _fold_sessions(cfg: RunConfig) -> List[Session]:
    sessions = load_dataset(str(cfg.get("data.root")))
    fold = str(cfg.get("eval.fold"))
    if fold == "all":
        return sessions
    if fold not in ("train", "val", "test"):
        raise ConfigError(f"eval.fold must be train, val, test or all, got {fold!r}")
    folds = split_dataset(
        sessions, scheme=str(cfg.get("split.scheme")), seed=int(cfg.get("split.seed")),
        fractions=(float(cfg.get("split.train_frac")), float(cfg.get("split.val_frac")),
                   float(cfg.get("split.test_frac"))))
    return getattr(folds, fold)


def ablate(cfg: RunConfig, toggles: Optional[Sequence[str]] = None,
           sessions: Optional[List[Session]] = None,
           folds: Optional[Folds] = None) -> Dict[str, EvalReport]:
    """Train and evaluate the full model plus one variant per disabled toggle."""
    toggles = list(toggles) if toggles else list(ABLATION_TOGGLES)
    for t in toggles:
        if t not in ABLATION_TOGGLES:
            raise ConfigError(f"unknown ablation toggle {t!r}, valid: {ABLATION_TOGGLES}")
    if sessions is None and folds is None:
        sessions = load_dataset(str(cfg.get("data.root")))
    out_root = str(cfg.get("run.out_dir"))
    reports: Dict[str, EvalReport] = {}
    variants = [("full", None)] + [(f"no_{t}", t) for t in toggles]
    for label, toggle in variants:
        variant_cfg = cfg.override(**{"run.out_dir": os.path.join(out_root, label)})
        if toggle is not None:
            variant_cfg = variant_cfg.override(**{f"model.use_{toggle}": False})
        result = train(variant_cfg, sessions=sessions, folds=folds)
        eval_sessions = result.folds.test if result.folds.test else result.folds.val
        reports[label] = evaluate(variant_cfg, result.model, eval_sessions,
                                  mode="both", label=label)
    return reports
