"""Radar IQ preprocessing: per-chirp range transform, region-of-interest
selection around the strongest static reflector, and conversion of the ROI
bins into a real-valued channel series."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import InvalidInputError, RoiDetectionError

C_LIGHT = 2.99792458e8


@dataclass(frozen=True)
class RadarParams:
    """Chirp configuration. bin_spacing is c / (2 * bandwidth) when the range
    transform length equals the fast-time sample count."""

    carrier_hz: float = 77e9
    bandwidth_hz: float = 4e9
    n_fast: int = 64
    roi_width_m: float = 0.25
    peak_threshold: float = 3.0

    @property
    def wavelength(self) -> float:
        return C_LIGHT / self.carrier_hz

    @property
    def bin_spacing(self) -> float:
        return C_LIGHT / (2.0 * self.bandwidth_hz)

    @property
    def max_range(self) -> float:
        return self.bin_spacing * (self.n_fast // 2)


@dataclass(frozen=True)
class RangeMatrix:
    """Complex range-bin x slow-time matrix with the selected ROI window."""

    data: np.ndarray
    bin_spacing: float
    roi: Tuple[int, int]

    @property
    def roi_bins(self) -> int:
        return self.roi[1] - self.roi[0]

    @property
    def roi_width_m(self) -> float:
        return self.roi_bins * self.bin_spacing

    def roi_data(self) -> np.ndarray:
        return self.data[self.roi[0]: self.roi[1]]


def rf_range_matrix(iq: np.ndarray, params: RadarParams = RadarParams()) -> RangeMatrix:
    """Transform raw IQ chirps (slow_time, fast_time) into range bins over
    slow time and pick a contiguous ROI spanning roi_width_m centered on the
    strongest static reflector.

    Raises RoiDetectionError when no bin stands above ``peak_threshold`` times
    the median bin magnitude.
    """
    iq = np.asarray(iq, dtype=np.complex128)
    if iq.ndim != 2:
        raise InvalidInputError(f"IQ array must be (chirps, samples), got shape {iq.shape}")
    if iq.shape[1] != params.n_fast:
        raise InvalidInputError(
            f"chirp sample count {iq.shape[1]} does not match configuration {params.n_fast}")
    if not np.all(np.isfinite(iq.real)) or not np.all(np.isfinite(iq.imag)):
        raise InvalidInputError("IQ array contains non-finite values")
    bins = np.fft.fft(iq, axis=1)[:, : params.n_fast // 2].T      # (bins, slow_time)
    profile = np.abs(bins).mean(axis=1)
    peak = int(np.argmax(profile))
    if profile[peak] < params.peak_threshold * np.median(profile):
        raise RoiDetectionError(
            f"no reflector above {params.peak_threshold}x the median range profile")
    n_roi = max(1, round(params.roi_width_m / params.bin_spacing))
    start = int(np.clip(peak - n_roi // 2, 0, bins.shape[0] - n_roi))
    return RangeMatrix(data=bins, bin_spacing=params.bin_spacing, roi=(start, start + n_roi))


def range_to_series(rm: RangeMatrix, mode: str = "reim", normalize: bool = True) -> np.ndarray:
    """Stack the ROI bins into a real (channels, slow_time) array.

    ``reim`` interleaves real and imaginary rows; ``magphase`` uses magnitude
    and unwrapped phase. Normalization divides by the mean ROI magnitude so the
    series is O(1) regardless of reflector strength.
    """
    roi = rm.roi_data()
    if normalize:
        scale = np.abs(roi).mean()
        roi = roi / (scale if scale > 0 else 1.0)
    if mode == "reim":
        series = np.concatenate([roi.real, roi.imag], axis=0)
    elif mode == "magphase":
        series = np.concatenate([np.abs(roi), np.unwrap(np.angle(roi), axis=1)], axis=0)
    else:
        raise InvalidInputError(f"unknown series mode {mode!r}")
    return series.astype(np.float64)
