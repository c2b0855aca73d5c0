"""Spectral heart-rate readout, accuracy metrics with per-group breakdowns,
and Bland-Altman agreement statistics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, InvalidInputError, NoPeakError

SKIN_TONES = ("light", "medium", "dark")
DEFAULT_HR_BAND = (0.6, 3.3)


@dataclass(frozen=True)
class BVPSignal:
    """A real-valued pulse signal with its sample rate in Hz."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError("signal contains non-finite values")
        if not np.isfinite(self.sample_rate) or self.sample_rate <= 0:
            raise InvalidInputError(f"sample_rate must be positive, got {self.sample_rate!r}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.shape[0] / self.sample_rate


def estimate_hr(signal, sample_rate: Optional[float] = None,
                band: Tuple[float, float] = DEFAULT_HR_BAND) -> float:
    """Heart rate in bpm from the dominant in-band spectral peak.

    The mean-removed, Hann-windowed magnitude spectrum is searched inside
    ``band``; the peak bin is refined by parabolic interpolation, so the error
    on a pure tone is well below one spectral bin. Raises NoPeakError when the
    band holds no energy above the numerical floor.
    """
    if isinstance(signal, BVPSignal):
        x, fs = signal.samples, signal.sample_rate
    else:
        if sample_rate is None:
            raise InvalidInputError("sample_rate required for a bare array")
        x, fs = np.asarray(signal, dtype=np.float64).reshape(-1), float(sample_rate)
    if x.shape[0] < 2 * fs:
        raise InvalidInputError(f"need at least 2 s of samples, got {x.shape[0] / fs:.2f} s")
    lo, hi = band
    if not lo < hi:
        raise ConfigError(f"band must satisfy lo < hi, got {band}")
    if hi > fs / 2.0:
        raise ConfigError(f"band upper edge {hi} Hz exceeds Nyquist {fs / 2.0} Hz")
    x = x - x.mean()
    spectrum = np.abs(np.fft.rfft(x * np.hanning(x.shape[0])))
    freqs = np.fft.rfftfreq(x.shape[0], d=1.0 / fs)
    in_band = np.flatnonzero((freqs >= lo) & (freqs <= hi))
    if in_band.size == 0:
        raise NoPeakError(f"band {band} contains no spectral bins at {fs} Hz")
    floor = 1e-12 * max(spectrum.max(), 1e-30) + 1e-30
    if spectrum[in_band].max() <= floor:
        raise NoPeakError("no in-band energy above the numerical floor")
    peak = in_band[int(np.argmax(spectrum[in_band]))]
    f_peak = freqs[peak]
    if 0 < peak < spectrum.shape[0] - 1:
        left, mid, right = spectrum[peak - 1: peak + 2]
        denom = left - 2.0 * mid + right
        if denom < 0:
            shift = 0.5 * (left - right) / denom
            f_peak += np.clip(shift, -0.5, 0.5) * (freqs[1] - freqs[0])
    return 60.0 * float(f_peak)


@dataclass(frozen=True)
class GroupMetrics:
    mae: float
    rmse: float
    rho: Optional[float]
    count: int


@dataclass(frozen=True)
class MetricsReport:
    """Accuracy summary: overall MAE/RMSE/rho plus per-skin-tone breakdown and
    dark-minus-light deltas when both groups are present. rho is None when
    fewer than two pairs are available, never fabricated."""

    mae: float
    rmse: float
    rho: Optional[float]
    count: int
    per_group: Dict[str, GroupMetrics] = field(default_factory=dict)
    delta_mae: Optional[float] = None
    delta_rmse: Optional[float] = None
    delta_rho: Optional[float] = None

    def to_dict(self) -> dict:
        out = {
            "mae": self.mae, "rmse": self.rmse, "rho": self.rho, "count": self.count,
            "per_group": {
                g: {"mae": m.mae, "rmse": m.rmse, "rho": m.rho, "count": m.count}
                for g, m in sorted(self.per_group.items())
            },
        }
        if self.delta_mae is not None:
            out["delta_mae"] = self.delta_mae
            out["delta_rmse"] = self.delta_rmse
            out["delta_rho"] = self.delta_rho
        return out

    def to_text(self) -> str:
        def fmt(v):
            return "undefined" if v is None else f"{v:.4f}"

        lines = [f"mae_bpm = {self.mae:.4f}", f"rmse_bpm = {self.rmse:.4f}",
                 f"rho = {fmt(self.rho)}", f"sessions = {self.count}"]
        for g, m in sorted(self.per_group.items()):
            lines.append(f"{g}.mae_bpm = {m.mae:.4f}")
            lines.append(f"{g}.rmse_bpm = {m.rmse:.4f}")
            lines.append(f"{g}.rho = {fmt(m.rho)}")
            lines.append(f"{g}.sessions = {m.count}")
        if self.delta_mae is not None:
            lines.append(f"delta_mae_bpm = {self.delta_mae:.4f}")
            lines.append(f"delta_rmse_bpm = {self.delta_rmse:.4f}")
            lines.append(f"delta_rho = {fmt(self.delta_rho)}")
        return "\n".join(lines) + "\n"


def _pearson(a: np.ndarray, b: np.ndarray) -> Optional[float]:
    if a.shape[0] < 2:
        return None
    da, db = a - a.mean(), b - b.mean()
    denom = np.sqrt((da * da).sum() * (db * db).sum())
    if denom == 0:
        return None
    return float((da * db).sum() / denom)


def _group_metrics(pred: np.ndarray, gt: np.ndarray) -> GroupMetrics:
    err = pred - gt
    return GroupMetrics(
        mae=float(np.mean(np.abs(err))),
        rmse=float(np.sqrt(np.mean(err * err))),
        rho=_pearson(pred, gt),
        count=int(err.shape[0]),
    )


def compute_metrics(pred: Sequence[float], gt: Sequence[float],
                    groups: Optional[Sequence[str]] = None) -> MetricsReport:
    """MAE, RMSE, and Pearson rho over paired bpm estimates, with optional
    per-skin-tone breakdown and dark-minus-light deltas."""
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    gt = np.asarray(gt, dtype=np.float64).reshape(-1)
    if pred.shape[0] != gt.shape[0]:
        raise InvalidInputError(f"length mismatch: {pred.shape[0]} vs {gt.shape[0]}")
    if pred.shape[0] == 0:
        raise InvalidInputError("no estimates to score")
    overall = _group_metrics(pred, gt)
    per_group: Dict[str, GroupMetrics] = {}
    deltas = (None, None, None)
    if groups is not None:
        groups = list(groups)
        if len(groups) != pred.shape[0]:
            raise InvalidInputError("group labels must match the estimates in length")
        unknown = sorted(set(groups) - set(SKIN_TONES))
        if unknown:
            raise InvalidInputError(f"unknown skin-tone labels: {unknown}")
        labels = np.asarray(groups)
        for g in SKIN_TONES:
            mask = labels == g
            if mask.any():
                per_group[g] = _group_metrics(pred[mask], gt[mask])
        if "dark" in per_group and "light" in per_group:
            dark, light = per_group["dark"], per_group["light"]
            drho = (dark.rho - light.rho
                    if dark.rho is not None and light.rho is not None else None)
            deltas = (dark.mae - light.mae, dark.rmse - light.rmse, drho)
    return MetricsReport(mae=overall.mae, rmse=overall.rmse, rho=overall.rho,
                         count=overall.count, per_group=per_group,
                         delta_mae=deltas[0], delta_rmse=deltas[1], delta_rho=deltas[2])


@dataclass(frozen=True)
class BlandAltman:
    """Per-pair (mean, difference) points with the bias and 1.96-sigma limits
    of agreement."""

    means: np.ndarray
    diffs: np.ndarray
    bias: float
    sd: float
    loa_low: float
    loa_high: float

    def to_dict(self) -> dict:
        return {
            "bias": self.bias, "sd": self.sd,
            "loa_low": self.loa_low, "loa_high": self.loa_high,
            "means": self.means.tolist(), "diffs": self.diffs.tolist(),
        }


def bland_altman(pred: Sequence[float], gt: Sequence[float]) -> BlandAltman:
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    gt = np.asarray(gt, dtype=np.float64).reshape(-1)
    if pred.shape[0] != gt.shape[0]:
        raise InvalidInputError(f"length mismatch: {pred.shape[0]} vs {gt.shape[0]}")
    if pred.shape[0] < 2:
        raise InvalidInputError("Bland-Altman needs at least 2 pairs")
    diffs = pred - gt
    means = 0.5 * (pred + gt)
    bias = float(diffs.mean())
    sd = float(diffs.std(ddof=0))
    return BlandAltman(means=means, diffs=diffs, bias=bias, sd=sd,
                       loa_low=bias - 1.96 * sd, loa_high=bias + 1.96 * sd)
