"""Cross-modal stages: bidirectional token encoding with shared dynamics,
channel-frequency interaction, and the fused signal predictor."""

from __future__ import annotations

import math
from typing import Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import InvalidInputError
from .ssm_blocks import BidirectionalScan, SharedSSMState, _check_width


class TokenEncoder(nn.Module):
    """Bidirectional token encoder over a (batch, channels, time) feature map.

    Each time step is one token: a linear projection plus an additive
    positional embedding, then a bidirectional selective scan. Token length is
    preserved. With ``enabled`` off the encoder is the identity map.
    """

    def __init__(self, width: int, state_size: int = 16, max_len: int = 1024,
                 learned_pos: bool = True, gate: str = "sigmoid",
                 shared_fwd: Optional[SharedSSMState] = None,
                 shared_bwd: Optional[SharedSSMState] = None,
                 enabled: bool = True):
        super().__init__()
        self.width = width
        self.max_len = max_len
        self.enabled = enabled
        if not enabled:
            return
        self.token_proj = nn.Linear(width, width)
        nn.init.uniform_(self.token_proj.weight, -0.5 / math.sqrt(width), 0.5 / math.sqrt(width))
        nn.init.zeros_(self.token_proj.bias)
        if learned_pos:
            self.pos = nn.Parameter(torch.zeros(max_len, width))
            nn.init.normal_(self.pos, std=0.02)
        else:
            pos = torch.arange(max_len).unsqueeze(1)
            dim = torch.arange(0, width, 2)
            angle = pos / torch.pow(10000.0, dim / width)
            table = torch.zeros(max_len, width)
            table[:, 0::2] = torch.sin(angle)
            table[:, 1::2] = torch.cos(angle[:, : width // 2])
            self.register_buffer("pos", table)
        self.scan = BidirectionalScan(width, state_size, gate=gate,
                                      shared_fwd=shared_fwd, shared_bwd=shared_bwd)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_width(x, self.width, "TokenEncoder")
        if not self.enabled:
            return x
        length = x.shape[2]
        if length > self.max_len:
            raise InvalidInputError(f"token length {length} exceeds max_len {self.max_len}")
        tokens = self.token_proj(x.transpose(1, 2)) + self.pos[:length]
        return self.scan(tokens.transpose(1, 2))


class SharedInteraction(nn.Module):
    """Dual-stream interaction stage.

    Each stream adds its own bidirectionally encoded tokens back onto itself
    and passes through a per-stream linear map. With ``shared`` on, both
    encoders' scans evolve under one state-transition and one input-projection
    parameter set, so equal inputs with equal readouts produce equal outputs.
    """

    def __init__(self, width: int, state_size: int = 16, max_len: int = 1024,
                 learned_pos: bool = True, gate: str = "sigmoid",
                 shared: bool = True, vim_enabled: bool = True):
        super().__init__()
        self.width = width
        self.shared = shared
        if shared:
            self.shared_fwd = SharedSSMState(width, state_size)
            self.shared_bwd = SharedSSMState(width, state_size)
        else:
            self.shared_fwd = self.shared_bwd = None
        kwargs = dict(state_size=state_size, max_len=max_len, learned_pos=learned_pos,
                      gate=gate, enabled=vim_enabled)
        self.encoder_rgb = TokenEncoder(width, shared_fwd=self.shared_fwd,
                                        shared_bwd=self.shared_bwd, **kwargs)
        self.encoder_rf = TokenEncoder(width, shared_fwd=self.shared_fwd,
                                       shared_bwd=self.shared_bwd, **kwargs)
        self.linear_rgb = nn.Linear(width, width)
        self.linear_rf = nn.Linear(width, width)
        for lin in (self.linear_rgb, self.linear_rf):
            nn.init.uniform_(lin.weight, -0.5 / math.sqrt(width), 0.5 / math.sqrt(width))
            nn.init.zeros_(lin.bias)

    def forward(self, hc: torch.Tensor, hf: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        _check_width(hc, self.width, "SharedInteraction")
        _check_width(hf, self.width, "SharedInteraction")
        if hc.shape[2] != hf.shape[2]:
            raise InvalidInputError(
                f"token lengths differ: rgb {hc.shape[2]} vs rf {hf.shape[2]}")
        hc4 = self.linear_rgb((hc + self.encoder_rgb(hc)).transpose(1, 2)).transpose(1, 2)
        hf4 = self.linear_rf((hf + self.encoder_rf(hf)).transpose(1, 2)).transpose(1, 2)
        return hc4, hf4


class ChannelFFTInteraction(nn.Module):
    """Frequency-domain interaction along the channel axis.

    A real-input transform over channels yields floor(c/2)+1 bins; each bin
    gets a learnable complex-affine mix of real and imaginary parts followed
    by a ReLU, and the inverse transform restores the channel domain. In
    bypass mode the interaction stage is skipped and the op is a pure
    round-trip (the identity up to float error).
    """

    def __init__(self, channels: int, bypass: bool = False, relu: bool = True):
        super().__init__()
        if channels < 2:
            raise InvalidInputError(f"channel width must be >= 2, got {channels}")
        self.channels = channels
        self.bypass = bypass
        self.relu = relu
        bins = channels // 2 + 1
        self.r = nn.Parameter(torch.ones(bins))
        self.i = nn.Parameter(torch.zeros(bins))
        self.r_bias = nn.Parameter(torch.zeros(bins))
        self.i_bias = nn.Parameter(torch.zeros(bins))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_width(x, self.channels, "ChannelFFTInteraction")
        spec = torch.fft.rfft(x.transpose(1, 2), dim=-1)
        if not self.bypass:
            re, im = spec.real, spec.imag
            h_re = re * self.r - im * self.i + self.r_bias
            h_im = im * self.r + re * self.i + self.i_bias
            if self.relu:
                h_re, h_im = F.relu(h_re), F.relu(h_im)
            spec = torch.complex(h_re, h_im)
        out = torch.fft.irfft(spec, n=self.channels, dim=-1)
        return out.transpose(1, 2)


class BVPHead(nn.Module):
    """Predictor head: linear temporal upsampling back to the frame rate and a
    pointwise projection to a single channel."""

    def __init__(self, width: int, upsample: int = 2):
        super().__init__()
        self.width = width
        self.upsample = upsample
        self.proj = nn.Conv1d(width, 1, 1)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        _check_width(h, self.width, "BVPHead")
        up = F.interpolate(h, scale_factor=self.upsample, mode="linear", align_corners=False)
        return self.proj(up).squeeze(1)


def fuse_and_predict(hc5: torch.Tensor, hf5: torch.Tensor, head: BVPHead) -> torch.Tensor:
    """Sum the two streams elementwise and decode one signal sample per frame."""
    if hc5.shape != hf5.shape:
        raise InvalidInputError(f"stream shapes differ: {tuple(hc5.shape)} vs {tuple(hf5.shape)}")
    return head(hc5 + hf5)
