"""Training objectives: negative Pearson correlation plus a spectral
energy-concentration penalty around the reference heart-rate frequency."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import torch

from .errors import ConfigError, DegenerateSignalError, InvalidInputError

_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class LossConfig:
    """Weights and band settings for the combined objective.

    snr_weight scales the spectral term; window_halfwidth (Hz) is the half
    width of the band counted as signal around the reference peak; hr_band
    bounds the physiological search range; epsilon guards an empty
    out-of-band denominator.
    """

    snr_weight: float = 0.1
    window_halfwidth: float = 0.1
    hr_band: Tuple[float, float] = (0.6, 3.3)
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.snr_weight < 0:
            raise ConfigError(f"snr_weight must be >= 0, got {self.snr_weight}")
        if self.window_halfwidth <= 0:
            raise ConfigError(f"window_halfwidth must be > 0, got {self.window_halfwidth}")
        lo, hi = self.hr_band
        if not lo < hi:
            raise ConfigError(f"hr_band must satisfy lo < hi, got {self.hr_band}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")


def _check_pair(y: torch.Tensor, yhat: torch.Tensor, min_len: int):
    if y.dim() != 1 or yhat.dim() != 1:
        raise InvalidInputError("loss inputs must be 1-D signals")
    if y.shape[0] != yhat.shape[0]:
        raise InvalidInputError(f"signal lengths differ: {y.shape[0]} vs {yhat.shape[0]}")
    if y.shape[0] < min_len:
        raise InvalidInputError(f"signals must have at least {min_len} samples, got {y.shape[0]}")


def neg_pearson_loss(y: torch.Tensor, yhat: torch.Tensor) -> torch.Tensor:
    """1 - Pearson(y, yhat), in [0, 2].

    Invariant to positive affine rescaling of either argument. A constant
    signal has no defined correlation and raises DegenerateSignalError.
    """
    _check_pair(y, yhat, 2)
    n = y.shape[0]
    sum_y, sum_p = y.sum(), yhat.sum()
    cov = n * (y * yhat).sum() - sum_y * sum_p
    var_y = n * (y * y).sum() - sum_y * sum_y
    var_p = n * (yhat * yhat).sum() - sum_p * sum_p
    scale_y = torch.clamp(n * (y * y).sum(), min=1.0)
    scale_p = torch.clamp(n * (yhat * yhat).sum(), min=1.0)
    if var_y <= _VAR_FLOOR * scale_y or var_p <= _VAR_FLOOR * scale_p:
        raise DegenerateSignalError("constant signal: Pearson correlation undefined")
    return 1.0 - cov / torch.sqrt(var_y * var_p)


def snr_loss(y: torch.Tensor, yhat: torch.Tensor, sample_rate: float,
             cfg: LossConfig = LossConfig()) -> torch.Tensor:
    """Negated ratio of predicted in-band to out-of-band spectral power.

    The signal window is [f0 - w, f0 + w], with f0 the in-band peak of the
    reference spectrum; the rest of the physiological band counts as noise.
    Minimizing the (negative) ratio concentrates predicted energy at the
    reference frequency. An all-zero prediction returns 0.
    """
    _check_pair(y, yhat, 16)
    lo, hi = cfg.hr_band
    nyquist = sample_rate / 2.0
    if hi > nyquist:
        raise ConfigError(f"hr_band upper edge {hi} Hz exceeds Nyquist {nyquist} Hz")
    freqs = torch.fft.rfftfreq(y.shape[0], d=1.0 / sample_rate, dtype=torch.float64)
    band = (freqs >= lo) & (freqs <= hi)
    with torch.no_grad():
        ref_power = torch.fft.rfft(y).abs()
        ref_power = torch.where(band, ref_power, torch.zeros_like(ref_power))
        f0 = freqs[torch.argmax(ref_power)]
    power = torch.fft.rfft(yhat).abs().square()
    if power.sum() == 0:
        return yhat.sum() * 0.0
    signal_window = band & ((freqs - f0).abs() <= cfg.window_halfwidth)
    noise_window = band & ~signal_window
    signal = power[signal_window].sum()
    noise = power[noise_window].sum()
    return -(signal / (noise + cfg.epsilon))


def total_loss(y: torch.Tensor, yhat: torch.Tensor, sample_rate: float,
               cfg: LossConfig = LossConfig()) -> torch.Tensor:
    """neg_pearson_loss plus snr_weight times snr_loss."""
    value = neg_pearson_loss(y, yhat)
    if cfg.snr_weight > 0:
        value = value + cfg.snr_weight * snr_loss(y, yhat, sample_rate, cfg)
    return value


def batch_total_loss(y: torch.Tensor, yhat: torch.Tensor, sample_rate: float,
                     cfg: LossConfig = LossConfig()) -> torch.Tensor:
    """Mean combined loss over the rows of (batch, time) signal pairs."""
    if y.shape != yhat.shape:
        raise InvalidInputError(f"batch shapes differ: {tuple(y.shape)} vs {tuple(yhat.shape)}")
    terms = [total_loss(y[b], yhat[b], sample_rate, cfg) for b in range(y.shape[0])]
    return torch.stack(terms).mean()
