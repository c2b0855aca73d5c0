"""End-to-end network: modality-specific feature blocks, shared-state token
interaction, channel-frequency mixing, and the fused signal predictor.

Token-rate alignment is enforced at construction: the RGB path halves its
frame count once and the RF path halves its sample count twice, so the RF
rate must be exactly twice the video frame rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import ConfigError, InvalidInputError
from .fusion import BVPHead, ChannelFFTInteraction, SharedInteraction, fuse_and_predict
from .temporal import AttentionMaskPool, DiffConvStem, RFAlignBlock, TemporalDiffEncoder

ABLATION_TOGGLES = ("vim", "cfft", "shared_ssm", "rfam", "tdmm")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture dimensions and ablation switches."""

    rf_channels: int = 14
    stem_width: int = 8
    token_width: int = 16
    state_size: int = 16
    tdmm_blocks: int = 1
    conv_width: int = 4
    gate: str = "sigmoid"
    alpha: float = 0.5
    beta: float = 0.5
    learned_pos: bool = True
    max_tokens: int = 1024
    fps: float = 30.0
    rf_rate: float = 60.0
    use_vim: bool = True
    use_cfft: bool = True
    use_shared_ssm: bool = True
    use_rfam: bool = True
    use_tdmm: bool = True

    def with_toggle_off(self, name: str) -> "ModelConfig":
        if name not in ABLATION_TOGGLES:
            raise ConfigError(f"unknown ablation toggle {name!r}, valid: {ABLATION_TOGGLES}")
        from dataclasses import replace
        return replace(self, **{f"use_{name}": False})


class PlainHalving(nn.Module):
    """Parameter-free stand-in for the RF alignment block: stride-2 pooling."""

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[2] % 2 != 0:
            raise InvalidInputError(f"temporal length must be even, got {x.shape[2]}")
        return nn.functional.avg_pool1d(x, 2)


class FusionNet(nn.Module):
    """Video (b, 3, t1, h, w) plus RF (b, c, t2 = 2 t1) in, pulse (b, t1) out."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        if abs(cfg.rf_rate - 2.0 * cfg.fps) > 1e-9:
            raise ConfigError(
                f"token alignment requires rf_rate == 2 * fps so that t2/4 == t1/2; "
                f"got fps={cfg.fps}, rf_rate={cfg.rf_rate}")
        self.cfg = cfg
        self.video_stem = DiffConvStem(cfg.stem_width, cfg.alpha, cfg.beta)
        self.video_pool = AttentionMaskPool(cfg.stem_width, cfg.token_width)
        self.rf_encoder = TemporalDiffEncoder(
            cfg.rf_channels, cfg.token_width, cfg.state_size,
            n_blocks=cfg.tdmm_blocks, gate=cfg.gate, use_diffs=cfg.use_tdmm)
        if cfg.use_rfam:
            self.rf_align1 = RFAlignBlock(cfg.token_width, cfg.token_width)
            self.rf_align2 = RFAlignBlock(cfg.token_width, cfg.token_width)
        else:
            self.rf_align1 = PlainHalving()
            self.rf_align2 = PlainHalving()
        self.interaction = SharedInteraction(
            cfg.token_width, cfg.state_size, max_len=cfg.max_tokens,
            learned_pos=cfg.learned_pos, gate=cfg.gate,
            shared=cfg.use_shared_ssm, vim_enabled=cfg.use_vim)
        self.cfft_rgb = ChannelFFTInteraction(cfg.token_width, bypass=not cfg.use_cfft)
        self.cfft_rf = ChannelFFTInteraction(cfg.token_width, bypass=not cfg.use_cfft)
        self.head = BVPHead(cfg.token_width, upsample=2)

    def forward(self, video: torch.Tensor, rf: torch.Tensor) -> torch.Tensor:
        if rf.shape[2] != 2 * video.shape[2]:
            raise InvalidInputError(
                f"RF length must be twice the frame count, got {rf.shape[2]} vs "
                f"{video.shape[2]} frames")
        hc = self.video_pool(self.video_stem(video))
        hf = self.rf_align2(self.rf_align1(self.rf_encoder(rf)))
        hc4, hf4 = self.interaction(hc, hf)
        hc5 = self.cfft_rgb(hc4)
        hf5 = self.cfft_rf(hf4)
        return fuse_and_predict(hc5, hf5, self.head)
