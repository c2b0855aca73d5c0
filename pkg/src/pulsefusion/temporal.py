"""Modality-specific feature blocks.

Low level: a temporal-difference encoder for the RF series and a two-stem
diff/raw fusion for video frames. High level: an L1-normalized attention mask
that collapses space into channels for video, and a channel-attention block
that halves the RF temporal rate so both streams meet at the same token rate.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import InvalidInputError
from .ssm_blocks import SelectiveBlock, _check_width

DIFF_OFFSETS = (-2, -1, 1, 2)


def _zero_conv_biases(module: nn.Module):
    """Convs start with zero bias so an all-zero input maps to zero features."""
    for m in module.modules():
        if isinstance(m, (nn.Conv1d, nn.Conv2d)) and m.bias is not None:
            nn.init.zeros_(m.bias)


def temporal_diff(x: torch.Tensor, time_axis: int = 2) -> torch.Tensor:
    """Shift-and-subtract differences d_k = x_t - x_{t+k} for k in (-2, -1, 1, 2).

    The four maps are concatenated on the channel axis (axis 1). Frames past
    either end are edge-replicated, so differences at the boundary fall to
    zero instead of wrapping.
    """
    t = x.shape[time_axis]
    if t < 5:
        raise InvalidInputError(f"temporal_diff needs at least 5 steps, got {t}")
    idx = torch.arange(t, device=x.device)
    diffs = []
    for k in DIFF_OFFSETS:
        shifted = x.index_select(time_axis, (idx + k).clamp(0, t - 1))
        diffs.append(x - shifted)
    return torch.cat(diffs, dim=1)


class TemporalDiffEncoder(nn.Module):
    """RF low-level encoder: frame differences, 7-tap conv, batch norm, then a
    gated selective block, repeated ``n_blocks`` times. Output keeps the input
    temporal length.

    With ``use_diffs`` off the entry conv reads the raw series instead of the
    difference stack (the ablation bypass).
    """

    def __init__(self, in_channels: int, width: int, state_size: int = 16,
                 n_blocks: int = 1, conv_len: int = 7, gate: str = "sigmoid",
                 use_diffs: bool = True):
        super().__init__()
        self.in_channels = in_channels
        self.use_diffs = use_diffs
        entry = len(DIFF_OFFSETS) * in_channels if use_diffs else in_channels
        pad = conv_len // 2
        convs, norms, blocks = [], [], []
        for i in range(n_blocks):
            convs.append(nn.Conv1d(entry if i == 0 else width, width, conv_len, padding=pad))
            norms.append(nn.BatchNorm1d(width))
            blocks.append(SelectiveBlock(width, state_size, gate=gate))
        self.convs = nn.ModuleList(convs)
        self.norms = nn.ModuleList(norms)
        self.blocks = nn.ModuleList(blocks)
        _zero_conv_biases(self)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_width(x, self.in_channels, "TemporalDiffEncoder")
        if x.shape[2] < 5:
            raise InvalidInputError(f"RF series needs at least 5 samples, got {x.shape[2]}")
        h = temporal_diff(x) if self.use_diffs else x
        for conv, norm, block in zip(self.convs, self.norms, self.blocks):
            h = block(norm(conv(h)))
        return h


class ChannelAttention(nn.Module):
    """Per-channel weights in (0, 1) from pooled summaries.

    Average-pooled and max-pooled summaries pass through the same two-layer
    projection; the summed logits go through a sigmoid.
    """

    def __init__(self, channels: int, reduction: int = 4):
        super().__init__()
        hidden = max(1, channels // reduction)
        self.proj = nn.Sequential(
            nn.Conv1d(channels, hidden, 1),
            nn.ReLU(),
            nn.Conv1d(hidden, channels, 1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        avg = x.mean(dim=2, keepdim=True)
        mx = x.amax(dim=2, keepdim=True)
        return torch.sigmoid(self.proj(avg) + self.proj(mx))


class RFAlignBlock(nn.Module):
    """RF high-level block: conv, batch norm, channel-attention reweighting,
    then a stride-2 average pool and ReLU. Halves the temporal length."""

    def __init__(self, in_channels: int, out_channels: int, conv_len: int = 7,
                 reduction: int = 4):
        super().__init__()
        self.in_channels = in_channels
        self.conv = nn.Conv1d(in_channels, out_channels, conv_len, padding=conv_len // 2)
        self.norm = nn.BatchNorm1d(out_channels)
        self.attention = ChannelAttention(out_channels, reduction)
        _zero_conv_biases(self)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_width(x, self.in_channels, "RFAlignBlock")
        if x.shape[2] % 2 != 0:
            raise InvalidInputError(f"RFAlignBlock needs an even temporal length, got {x.shape[2]}")
        h = self.norm(self.conv(x))
        h = h * self.attention(h)
        return F.relu(F.avg_pool1d(h, 2))


class DiffConvStem(nn.Module):
    """Video low-level block fusing raw-frame and frame-difference stems.

    Each stem is a 7x7 conv + batch norm + ReLU; the entry stems also max-pool
    space by 2. The two paths combine as

        fused = alpha * stem2(x_origin) + beta * stem2(alpha * x_origin + beta * x_diff)

    with alpha = beta = 0.5 by default.
    """

    def __init__(self, width: int = 8, alpha: float = 0.5, beta: float = 0.5):
        super().__init__()
        self.width = width
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.stem_raw = self._entry_stem(3, width)
        self.stem_diff = self._entry_stem(3 * len(DIFF_OFFSETS), width)
        self.stem_fuse = nn.Sequential(
            nn.Conv2d(width, width, 7, padding=3), nn.BatchNorm2d(width), nn.ReLU(),
        )
        _zero_conv_biases(self)

    @staticmethod
    def _entry_stem(in_ch: int, width: int) -> nn.Sequential:
        return nn.Sequential(
            nn.Conv2d(in_ch, width, 7, padding=3), nn.BatchNorm2d(width), nn.ReLU(),
            nn.MaxPool2d(2),
        )

    @staticmethod
    def _per_frame(module: nn.Module, x: torch.Tensor) -> torch.Tensor:
        b, c, t = x.shape[:3]
        out = module(x.transpose(1, 2).reshape(b * t, c, *x.shape[3:]))
        return out.reshape(b, t, *out.shape[1:]).transpose(1, 2)

    def forward(self, video: torch.Tensor) -> torch.Tensor:
        if video.dim() != 5 or video.shape[1] != 3:
            raise InvalidInputError(f"video must be (batch, 3, time, h, w), got {tuple(video.shape)}")
        if video.shape[2] < 5:
            raise InvalidInputError(f"video needs at least 5 frames, got {video.shape[2]}")
        if video.shape[3] % 2 or video.shape[4] % 2:
            raise InvalidInputError(f"frame size must be even, got {tuple(video.shape[3:])}")
        diffs = temporal_diff(video)
        x_origin = self._per_frame(self.stem_raw, video)
        x_diff = self._per_frame(self.stem_diff, diffs)
        mixed = self.alpha * x_origin + self.beta * x_diff
        return (self.alpha * self._per_frame(self.stem_fuse, x_origin)
                + self.beta * self._per_frame(self.stem_fuse, mixed))


class AttentionMaskPool(nn.Module):
    """Video high-level block: spatial attention mask, pooling to tokens.

    A 5x5 strided-conv stem reduces the grid to (h/8, w/8) of the original
    frame; its sigmoid response is L1-normalized so the mask sums to
    (h/8)(w/8)/2 over space for every slice. The masked features are averaged
    over space, the temporal length is halved, and a final conv + batch norm
    maps to the token width.
    """

    def __init__(self, width: int, out_width: int):
        super().__init__()
        self.width = width
        self.mask_stem = nn.Sequential(
            nn.Conv2d(width, width, 5, stride=2, padding=2),
            nn.Conv2d(width, width, 5, stride=2, padding=2),
        )
        self.out_conv = nn.Conv1d(width, out_width, 3, padding=1)
        self.out_norm = nn.BatchNorm1d(out_width)
        _zero_conv_biases(self)

    def compute_mask(self, frames: torch.Tensor) -> torch.Tensor:
        """Normalized mask for a stack of (n, c, h, w) feature frames."""
        sig = torch.sigmoid(self.mask_stem(frames))
        cells = sig.shape[2] * sig.shape[3]
        return cells * sig / (2.0 * sig.sum(dim=(2, 3), keepdim=True))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 5 or x.shape[1] != self.width:
            raise InvalidInputError(f"expected (batch, {self.width}, time, h, w), got {tuple(x.shape)}")
        b, c, t, h2, w2 = x.shape
        if (2 * h2) % 8 or (2 * w2) % 8:
            raise InvalidInputError(f"frame size must be divisible by 8, got {(2 * h2, 2 * w2)}")
        if t % 2:
            raise InvalidInputError(f"temporal length must be even, got {t}")
        x = x.reshape(b, c, t // 2, 2, h2, w2).mean(dim=3)     # halve the token rate
        frames = x.transpose(1, 2).reshape(b * (t // 2), c, h2, w2)
        feats = F.avg_pool2d(frames, 4)
        attn = self.compute_mask(frames) * feats
        tokens = attn.mean(dim=(2, 3)).reshape(b, t // 2, c).transpose(1, 2)
        return self.out_norm(self.out_conv(tokens))
