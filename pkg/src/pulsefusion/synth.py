"""Synthetic paired RGB + RF session generation with known ground-truth pulse.

A session couples a face-like video whose skin region is intensity-modulated
by the pulse waveform, a radar IQ stream whose chest-bin phase carries the
same waveform plus a larger respiration sway, and the clean waveform itself.
Everything is a pure function of the config and its seed.

Skin-tone proxy: the ``tone_bias`` knob scales the pulse amplitude and mean
luminance down for medium and dark sessions, emulating reduced reflectance,
so the fairness protocol can be exercised with a controllable bias.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .errors import ConfigError, InvalidInputError
from .metrics import BVPSignal, DEFAULT_HR_BAND, SKIN_TONES
from .radar import RadarParams, range_to_series, rf_range_matrix

# Pulse contrast per color channel relative to pulse_amplitude (strongest in green).
CHANNEL_PULSE_WEIGHTS = (0.6, 1.0, 0.7)
TONE_AMP_WEIGHT = {"light": 0.0, "medium": 0.5, "dark": 1.0}
TONE_LUM_WEIGHT = {"light": 0.0, "medium": 0.15, "dark": 0.3}


@dataclass(frozen=True)
class VideoClip:
    """(3, frames, height, width) pixel array in [0, 1] with its frame rate."""

    data: np.ndarray
    fps: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 4 or data.shape[0] != 3:
            raise InvalidInputError(f"video must be (3, t, h, w), got shape {data.shape}")
        if data.shape[1] < 5:
            raise InvalidInputError(f"video needs at least 5 frames, got {data.shape[1]}")
        if not np.all(np.isfinite(data)):
            raise InvalidInputError("video contains non-finite values")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "fps", float(self.fps))

    @property
    def frames(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class RFSeries:
    """(channels, samples) real array with its slow-time sample rate."""

    data: np.ndarray
    sample_rate: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 2:
            raise InvalidInputError(f"RF series must be (channels, samples), got {data.shape}")
        if data.shape[1] < 5:
            raise InvalidInputError(f"RF series needs at least 5 samples, got {data.shape[1]}")
        if not np.all(np.isfinite(data)):
            raise InvalidInputError("RF series contains non-finite values")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    @property
    def samples(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Session:
    """One recording: video, RF series, ground-truth pulse, and labels."""

    video: VideoClip
    rf: RFSeries
    ppg_gt: BVPSignal
    skin_tone: str
    session_id: str
    subject_id: str

    def __post_init__(self):
        if self.skin_tone not in SKIN_TONES:
            raise InvalidInputError(f"skin_tone must be one of {SKIN_TONES}, got {self.skin_tone!r}")
        frame_period = 1.0 / self.video.fps
        durations = (self.video.frames / self.video.fps,
                     self.rf.samples / self.rf.sample_rate,
                     self.ppg_gt.duration)
        if max(durations) - min(durations) > frame_period + 1e-9:
            raise InvalidInputError(
                f"modality durations disagree beyond one frame period: {durations}")

    @property
    def duration(self) -> float:
        return self.video.frames / self.video.fps


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings. The seed fixes all randomness."""

    hr_bpm: float = 72.0
    hr_drift_bpm: float = 0.0
    resp_bpm: float = 15.0
    duration_s: float = 10.0
    fps: float = 30.0
    rf_rate: float = 60.0
    height: int = 64
    width: int = 64
    pulse_amplitude: float = 0.05
    mean_luminance: float = 0.55
    skin_region: Tuple[int, int, int, int] = (16, 16, 48, 48)   # (top, left, bottom, right)
    video_pixel_noise: float = 0.0
    video_gain_noise: float = 0.0
    illum_drift_amp: float = 0.0
    rf_noise: float = 0.0
    chest_heart_mm: float = 0.5
    chest_resp_mm: float = 4.0
    target_range_m: float = 0.8
    rf_mode: str = "reim"                   # or "magphase"
    radar: RadarParams = field(default_factory=RadarParams)
    skin_tone: str = "light"
    tone_bias: float = 0.0
    session_id: str = "s00"
    subject_id: str = "subj00"
    seed: int = 0

    def __post_init__(self):
        lo, hi = DEFAULT_HR_BAND
        if not lo * 60.0 < self.hr_bpm < hi * 60.0:
            raise ConfigError(
                f"hr_bpm {self.hr_bpm} outside the physiological band "
                f"({lo * 60.0:.0f}..{hi * 60.0:.0f} bpm)")
        if self.skin_tone not in SKIN_TONES:
            raise ConfigError(f"skin_tone must be one of {SKIN_TONES}, got {self.skin_tone!r}")
        if not 0.0 <= self.tone_bias < 1.0:
            raise ConfigError(f"tone_bias must lie in [0, 1), got {self.tone_bias}")
        if self.duration_s <= 0 or self.fps <= 0 or self.rf_rate <= 0:
            raise ConfigError("duration_s, fps and rf_rate must be positive")
        top, left, bottom, right = self.skin_region
        if not (0 <= top < bottom <= self.height and 0 <= left < right <= self.width):
            raise ConfigError(f"skin_region {self.skin_region} does not fit a "
                              f"{self.height}x{self.width} frame")

    @property
    def amp_factor(self) -> float:
        return 1.0 - self.tone_bias * TONE_AMP_WEIGHT[self.skin_tone]

    @property
    def lum_factor(self) -> float:
        return 1.0 - self.tone_bias * TONE_LUM_WEIGHT[self.skin_tone]


def pulse_waveform(phase: np.ndarray) -> np.ndarray:
    """Quasi-periodic pulse shape: fundamental plus a weaker second harmonic."""
    return np.sin(phase) - 0.3 * np.sin(2.0 * phase + 0.4)


def _hr_phase(cfg: SynthConfig, t: np.ndarray) -> np.ndarray:
    """Integrated instantaneous pulse frequency (rad), shared by all modalities."""
    f0 = cfg.hr_bpm / 60.0
    if cfg.hr_drift_bpm == 0.0:
        return 2.0 * np.pi * f0 * t
    drift_hz = cfg.hr_drift_bpm / 60.0
    f_mod = 0.05
    # integral of f0 + drift * sin(2 pi f_mod t)
    return 2.0 * np.pi * (f0 * t + drift_hz * (1.0 - np.cos(2.0 * np.pi * f_mod * t))
                          / (2.0 * np.pi * f_mod))


def _smooth_noise(rng: np.random.Generator, n: int, cutoff_bins: int) -> np.ndarray:
    """Unit-RMS low-frequency noise from a truncated random spectrum."""
    spec = np.zeros(n // 2 + 1, dtype=np.complex128)
    k = max(2, cutoff_bins)
    spec[1:k] = rng.standard_normal(k - 1) + 1j * rng.standard_normal(k - 1)
    x = np.fft.irfft(spec, n=n)
    rms = np.sqrt(np.mean(x * x))
    return x / rms if rms > 0 else x


def _base_texture(rng: np.random.Generator, cfg: SynthConfig) -> np.ndarray:
    """Smooth face-like background texture per channel, in [0.2, 0.8]."""
    h, w = cfg.height, cfg.width
    yy, xx = np.mgrid[0:h, 0:w]
    blob = np.exp(-(((yy - h / 2) / (0.45 * h)) ** 2 + ((xx - w / 2) / (0.38 * w)) ** 2))
    tex = np.empty((3, h, w))
    for c in range(3):
        grains = rng.standard_normal((h // 8, w // 8))
        smooth = np.kron(grains, np.ones((8, 8)))[:h, :w]
        smooth = smooth / max(np.abs(smooth).max(), 1e-9)
        tex[c] = 0.5 * blob + 0.12 * smooth
    tex = 0.2 + 0.6 * (tex - tex.min()) / max(tex.max() - tex.min(), 1e-9)
    return tex


def _synth_video(cfg: SynthConfig, rng: np.random.Generator,
                 pulse: np.ndarray) -> VideoClip:
    t1 = pulse.shape[0]
    tex = _base_texture(rng, cfg) * cfg.lum_factor * (cfg.mean_luminance / 0.5)
    top, left, bottom, right = cfg.skin_region
    frames = np.broadcast_to(tex[:, None], (3, t1, cfg.height, cfg.width)).copy()
    amp = cfg.pulse_amplitude * cfg.amp_factor
    for c, wgt in enumerate(CHANNEL_PULSE_WEIGHTS):
        frames[c, :, top:bottom, left:right] += (
            amp * wgt * pulse[:, None, None] * tex[c, None, top:bottom, left:right] / 0.5)
    if cfg.illum_drift_amp > 0:
        drift = cfg.illum_drift_amp * _smooth_noise(rng, t1, int(t1 / cfg.fps) + 2)
        frames += drift[None, :, None, None]
    if cfg.video_gain_noise > 0:
        gain = 1.0 + cfg.video_gain_noise * rng.standard_normal(t1)
        frames *= gain[None, :, None, None]
    if cfg.video_pixel_noise > 0:
        frames += cfg.video_pixel_noise * rng.standard_normal(frames.shape)
    return VideoClip(data=np.clip(frames, 0.0, 1.0), fps=cfg.fps)


def _synth_iq(cfg: SynthConfig, rng: np.random.Generator,
              pulse_rf: np.ndarray, t_rf: np.ndarray) -> np.ndarray:
    """Single-target IQ chirps whose phase carries chest displacement."""
    params = cfg.radar
    displacement = (cfg.chest_heart_mm * 1e-3 * pulse_rf
                    + cfg.chest_resp_mm * 1e-3 * np.sin(2.0 * np.pi * cfg.resp_bpm / 60.0 * t_rf))
    target_range = cfg.target_range_m + displacement
    n = np.arange(params.n_fast)
    beat_cycles = target_range[:, None] / params.bin_spacing      # range in bin units
    carrier_phase = 4.0 * np.pi * target_range / params.wavelength
    iq = np.exp(1j * (2.0 * np.pi * beat_cycles * n[None, :] / params.n_fast
                      + carrier_phase[:, None]))
    if cfg.rf_noise > 0:
        iq = iq + cfg.rf_noise * (rng.standard_normal(iq.shape)
                                  + 1j * rng.standard_normal(iq.shape))
    return iq


def synth_session(cfg: SynthConfig) -> Session:
    """Generate one paired session; bitwise deterministic for a given config."""
    rng = np.random.default_rng(cfg.seed)
    t1 = int(round(cfg.duration_s * cfg.fps))
    t2 = int(round(cfg.duration_s * cfg.rf_rate))
    t_video = np.arange(t1) / cfg.fps
    t_rf = np.arange(t2) / cfg.rf_rate
    pulse_video = pulse_waveform(_hr_phase(cfg, t_video))
    pulse_rf = pulse_waveform(_hr_phase(cfg, t_rf))

    video = _synth_video(cfg, rng, pulse_video)
    iq = _synth_iq(cfg, rng, pulse_rf, t_rf)
    rm = rf_range_matrix(iq, cfg.radar)
    rf = RFSeries(data=range_to_series(rm, mode=cfg.rf_mode), sample_rate=cfg.rf_rate)
    ppg = BVPSignal(samples=pulse_video, sample_rate=cfg.fps)
    return Session(video=video, rf=rf, ppg_gt=ppg, skin_tone=cfg.skin_tone,
                   session_id=cfg.session_id, subject_id=cfg.subject_id)


def synth_dataset(n_subjects: int, sessions_per_subject: int,
                  base: Optional[SynthConfig] = None, seed: int = 0,
                  hr_range: Tuple[float, float] = (58.0, 105.0)) -> List[Session]:
    """Deterministic multi-subject dataset.

    Subjects get round-robin skin tones and a per-subject heart rate drawn
    from ``hr_range``; session seeds derive from the dataset seed.
    """
    if base is None:
        base = SynthConfig()
    rng = np.random.default_rng(seed)
    sessions = []
    for s in range(n_subjects):
        tone = SKIN_TONES[s % len(SKIN_TONES)]
        hr = float(rng.uniform(*hr_range))
        for k in range(sessions_per_subject):
            cfg = replace(
                base, hr_bpm=hr + float(rng.uniform(-2.0, 2.0)), skin_tone=tone,
                subject_id=f"subj{s:02d}", session_id=f"s{k:02d}",
                seed=seed * 100003 + s * 1009 + k,
            )
            sessions.append(synth_session(cfg))
    return sessions
