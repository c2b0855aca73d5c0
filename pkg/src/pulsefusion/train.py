"""Training loop: windowed clip sampling, adaptive-moment optimization of the
combined objective, divergence detection, and best-validation checkpointing."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from .config import RunConfig
from .errors import (CheckpointError, ConfigError, DegenerateSignalError,
                     DivergenceError)
from .losses import batch_total_loss, neg_pearson_loss, total_loss
from .model import FusionNet
from .session_io import load_dataset
from .splits import Folds, split_dataset
from .synth import Session


@dataclass
class TrainResult:
    checkpoint_path: str
    history: List[Dict[str, float]]
    folds: Folds
    model: FusionNet


def session_tensors(session: Session) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    video = torch.from_numpy(np.ascontiguousarray(session.video.data)).float()
    rf = torch.from_numpy(np.ascontiguousarray(session.rf.data)).float()
    ppg = torch.from_numpy(session.ppg_gt.samples).float()
    return video, rf, ppg


def window_frames(cfg: RunConfig) -> int:
    fps = float(cfg.get("data.fps"))
    frames = int(round(float(cfg.get("train.window_s")) * fps))
    frames -= frames % 2
    if frames < 16:
        raise ConfigError(f"train.window_s too short: {frames} frames")
    return frames


def _cut_window(session: Session, start: int, frames: int):
    video, rf, ppg = session_tensors(session)
    return (video[:, start:start + frames],
            rf[:, 2 * start:2 * (start + frames)],
            ppg[start:start + frames])


def _batches(items: Sequence, size: int):
    for i in range(0, len(items), size):
        yield items[i:i + size]


def build_model(cfg: RunConfig, rf_channels: int, seed: int) -> FusionNet:
    torch.manual_seed(seed)
    return FusionNet(cfg.model_config(rf_channels))


def save_checkpoint(path: str, model: FusionNet, cfg: RunConfig,
                    epoch: int, history: List[Dict[str, float]]):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    torch.save({
        "state_dict": model.state_dict(),
        "config": cfg.to_flat(),
        "rf_channels": model.cfg.rf_channels,
        "epoch": epoch,
        "history": history,
    }, path)


def load_checkpoint(path: str, cfg: RunConfig) -> FusionNet:
    """Rebuild the model from a checkpoint; dimension mismatches raise
    CheckpointError."""
    if not os.path.isfile(path):
        raise CheckpointError(f"checkpoint {path} does not exist")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    model = FusionNet(cfg.model_config(payload["rf_channels"]))
    try:
        model.load_state_dict(payload["state_dict"])
    except RuntimeError as exc:
        raise CheckpointError(f"checkpoint {path} incompatible with configured "
                              f"model dimensions: {exc}") from exc
    model.eval()
    return model


def _epoch_loss(model: FusionNet, batches, loss_cfg, fps: float,
                dropout: float, rng: Optional[np.random.Generator],
                optimizer=None) -> Tuple[float, int]:
    total, count = 0.0, 0
    for bi, batch in enumerate(batches):
        videos = torch.stack([w[0] for w in batch])
        rfs = torch.stack([w[1] for w in batch])
        targets = torch.stack([w[2] for w in batch])
        if rng is not None and dropout > 0:
            for b in range(videos.shape[0]):
                draw = rng.random()
                if draw < dropout:
                    rfs[b] = 0.0
                elif draw < 2 * dropout:
                    videos[b] = 0.0
        pred = model(videos, rfs)
        try:
            loss = batch_total_loss(targets, pred, fps, loss_cfg)
        except DegenerateSignalError as exc:
            raise DivergenceError(f"degenerate constant prediction in batch {bi}: "
                                  f"{exc}") from exc
        if not torch.isfinite(loss):
            raise DivergenceError(f"non-finite training loss in batch {bi}")
        if optimizer is not None:
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        total += float(loss.detach())
        count += 1
    return total / max(count, 1), count


def _validate(model: FusionNet, windows, loss_cfg, fps: float,
              batch_size: int) -> Tuple[float, float]:
    """Mean combined loss and mean correlation-only term over the val windows.
    A degenerate constant prediction counts as the worst correlation."""
    total, pearson, count = 0.0, 0.0, 0
    with torch.no_grad():
        for batch in _batches(windows, batch_size):
            videos = torch.stack([w[0] for w in batch])
            rfs = torch.stack([w[1] for w in batch])
            targets = torch.stack([w[2] for w in batch])
            pred = model(videos, rfs)
            for b in range(pred.shape[0]):
                try:
                    total += float(total_loss(targets[b], pred[b], fps, loss_cfg))
                    pearson += float(neg_pearson_loss(targets[b], pred[b]))
                except DegenerateSignalError:
                    total += 2.0
                    pearson += 2.0
                count += 1
    return total / max(count, 1), pearson / max(count, 1)


def train(cfg: RunConfig, sessions: Optional[List[Session]] = None,
          folds: Optional[Folds] = None) -> TrainResult:
    """Train on the subject-disjoint train fold, track validation loss each
    epoch, and keep the best-validation checkpoint."""
    if sessions is None and folds is None:
        sessions = load_dataset(str(cfg.get("data.root")))
    if folds is None:
        folds = split_dataset(
            sessions, scheme=str(cfg.get("split.scheme")), seed=int(cfg.get("split.seed")),
            fractions=(float(cfg.get("split.train_frac")), float(cfg.get("split.val_frac")),
                       float(cfg.get("split.test_frac"))))
    fps = float(cfg.get("data.fps"))
    frames = window_frames(cfg)
    seed = int(cfg.get("run.seed"))
    out_dir = str(cfg.get("run.out_dir"))
    os.makedirs(out_dir, exist_ok=True)
    loss_cfg = cfg.loss_config()
    rf_channels = folds.train[0].rf.data.shape[0]
    model = build_model(cfg, rf_channels, seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=float(cfg.get("train.lr")),
                                 weight_decay=float(cfg.get("train.weight_decay")))
    batch_size = int(cfg.get("train.batch_size"))
    per_session = int(cfg.get("train.windows_per_session"))
    dropout = float(cfg.get("train.modality_dropout"))
    epochs = int(cfg.get("train.epochs"))

    val_windows = []
    for s in folds.val:
        start = max(0, (s.video.frames - frames) // 2)
        val_windows.append(_cut_window(s, start, frames))

    history: List[Dict[str, float]] = []
    ckpt_path = os.path.join(out_dir, "model.ckpt")
    best_val = float("inf")
    for epoch in range(epochs):
        rng = np.random.default_rng((seed + 1) * 1_000_003 + epoch)
        windows = []
        for s in folds.train:
            hi = max(1, s.video.frames - frames + 1)
            for _ in range(per_session):
                windows.append(_cut_window(s, int(rng.integers(0, hi)), frames))
        order = rng.permutation(len(windows))
        windows = [windows[i] for i in order]
        model.train()
        train_loss, _ = _epoch_loss(model, _batches(windows, batch_size), loss_cfg,
                                    fps, dropout, rng, optimizer)
        model.eval()
        val_loss, val_pearson = _validate(model, val_windows, loss_cfg, fps, batch_size)
        history.append({"epoch": epoch, "train": train_loss, "val": val_loss,
                        "val_neg_pearson": val_pearson})
        if val_loss < best_val:
            best_val = val_loss
            save_checkpoint(ckpt_path, model, cfg, epoch, history)

    if not os.path.isfile(ckpt_path):
        save_checkpoint(ckpt_path, model, cfg, epochs - 1, history)
    with open(os.path.join(out_dir, "train_log.txt"), "w") as f:
        for fold, counts in sorted(folds.tone_counts().items()):
            tones = " ".join(f"{t}={counts[t]}" for t in sorted(counts))
            f.write(f"fold {fold} subjects_by_tone {tones}\n")
        for row in history:
            f.write(f"epoch {row['epoch']:03d} train {row['train']:.9g} "
                    f"val {row['val']:.9g} val_neg_pearson "
                    f"{row['val_neg_pearson']:.9g}\n")
    best_model = load_checkpoint(ckpt_path, cfg)
    return TrainResult(checkpoint_path=ckpt_path, history=history, folds=folds,
                       model=best_model)
