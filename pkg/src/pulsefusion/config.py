"""Run configuration: flat ``key = value`` text with dotted namespaces.

Every tunable default in the package is overridable here; unknown keys are
rejected so typos fail loudly. Values are coerced to the type of the default.
"""

from __future__ import annotations

import os
from typing import Dict, Optional

from .errors import ConfigError
from .losses import LossConfig
from .model import ModelConfig
from .synth import SynthConfig

DEFAULTS: Dict[str, object] = {
    # run-wide
    "run.out_dir": "runs/default",
    "run.seed": 0,
    # data on disk
    "data.root": "data/synthetic",
    "data.fps": 30.0,
    "data.rf_rate": 60.0,
    # model dimensions and ablation toggles (0 infers rf channels from data)
    "model.rf_channels": 0,
    "model.stem_width": 8,
    "model.token_width": 16,
    "model.state_size": 16,
    "model.tdmm_blocks": 1,
    "model.conv_width": 4,
    "model.gate": "sigmoid",
    "model.alpha": 0.5,
    "model.beta": 0.5,
    "model.learned_pos": True,
    "model.max_tokens": 1024,
    "model.use_vim": True,
    "model.use_cfft": True,
    "model.use_shared_ssm": True,
    "model.use_rfam": True,
    "model.use_tdmm": True,
    # loss
    "loss.snr_weight": 0.1,
    "loss.window_halfwidth": 0.1,
    "loss.band_lo": 0.6,
    "loss.band_hi": 3.3,
    "loss.epsilon": 1e-8,
    # training
    "train.batch_size": 4,
    "train.epochs": 30,
    "train.lr": 1e-4,
    "train.weight_decay": 0.0,
    "train.window_s": 3.0,
    "train.windows_per_session": 1,
    "train.modality_dropout": 0.25,
    # split
    "split.scheme": "random",
    "split.seed": 0,
    "split.train_frac": 0.8,
    "split.val_frac": 0.1,
    "split.test_frac": 0.1,
    # evaluation
    "eval.mode": "both",
    "eval.fold": "test",
    "eval.band_lo": 0.6,
    "eval.band_hi": 3.3,
    "eval.hr_window_s": 0.0,
    # synthetic data generation
    "synth.n_subjects": 12,
    "synth.sessions_per_subject": 2,
    "synth.duration_s": 10.0,
    "synth.height": 64,
    "synth.width": 64,
    "synth.hr_lo": 58.0,
    "synth.hr_hi": 105.0,
    "synth.hr_drift_bpm": 0.0,
    "synth.pulse_amplitude": 0.05,
    "synth.video_pixel_noise": 0.0,
    "synth.video_gain_noise": 0.0,
    "synth.illum_drift_amp": 0.0,
    "synth.rf_noise": 0.0,
    "synth.tone_bias": 0.0,
    "synth.rf_mode": "reim",
    "synth.seed": 0,
}

EVAL_MODES = ("both", "rgb_only", "rf_only")


def _coerce(key: str, raw: str, default: object):
    text = raw.strip()
    if isinstance(default, bool):
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from exc
    if isinstance(default, float):
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from exc
    return text


def parse_config_text(text: str) -> Dict[str, str]:
    pairs: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, value = stripped.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs


class RunConfig:
    """Validated configuration with typed access and section builders."""

    def __init__(self, overrides: Optional[Dict[str, object]] = None):
        self.values: Dict[str, object] = dict(DEFAULTS)
        for key, value in (overrides or {}).items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown configuration key {key!r}")
            if isinstance(value, str) and not isinstance(DEFAULTS[key], str):
                value = _coerce(key, value, DEFAULTS[key])
            self.values[key] = value
        if self.values["eval.mode"] not in EVAL_MODES:
            raise ConfigError(f"eval.mode must be one of {EVAL_MODES}, "
                              f"got {self.values['eval.mode']!r}")

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        if not os.path.isfile(path):
            raise ConfigError(f"config file {path} does not exist")
        with open(path, "r") as f:
            return cls(parse_config_text(f.read()))

    def get(self, key: str):
        if key not in self.values:
            raise ConfigError(f"unknown configuration key {key!r}")
        return self.values[key]

    def override(self, **pairs) -> "RunConfig":
        merged = dict(self.values)
        merged.update(pairs)
        return RunConfig(merged)

    def to_flat(self) -> Dict[str, object]:
        return dict(sorted(self.values.items()))

    def model_config(self, rf_channels: Optional[int] = None) -> ModelConfig:
        configured = int(self.get("model.rf_channels"))
        if configured > 0:
            rf_channels = configured
        if rf_channels is None or rf_channels <= 0:
            raise ConfigError("model.rf_channels not set and not inferable from data")
        return ModelConfig(
            rf_channels=rf_channels,
            stem_width=int(self.get("model.stem_width")),
            token_width=int(self.get("model.token_width")),
            state_size=int(self.get("model.state_size")),
            tdmm_blocks=int(self.get("model.tdmm_blocks")),
            conv_width=int(self.get("model.conv_width")),
            gate=str(self.get("model.gate")),
            alpha=float(self.get("model.alpha")),
            beta=float(self.get("model.beta")),
            learned_pos=bool(self.get("model.learned_pos")),
            max_tokens=int(self.get("model.max_tokens")),
            fps=float(self.get("data.fps")),
            rf_rate=float(self.get("data.rf_rate")),
            use_vim=bool(self.get("model.use_vim")),
            use_cfft=bool(self.get("model.use_cfft")),
            use_shared_ssm=bool(self.get("model.use_shared_ssm")),
            use_rfam=bool(self.get("model.use_rfam")),
            use_tdmm=bool(self.get("model.use_tdmm")),
        )

    def loss_config(self) -> LossConfig:
        return LossConfig(
            snr_weight=float(self.get("loss.snr_weight")),
            window_halfwidth=float(self.get("loss.window_halfwidth")),
            hr_band=(float(self.get("loss.band_lo")), float(self.get("loss.band_hi"))),
            epsilon=float(self.get("loss.epsilon")),
        )

    def synth_config(self) -> SynthConfig:
        return SynthConfig(
            duration_s=float(self.get("synth.duration_s")),
            fps=float(self.get("data.fps")),
            rf_rate=float(self.get("data.rf_rate")),
            height=int(self.get("synth.height")),
            width=int(self.get("synth.width")),
            hr_drift_bpm=float(self.get("synth.hr_drift_bpm")),
            pulse_amplitude=float(self.get("synth.pulse_amplitude")),
            video_pixel_noise=float(self.get("synth.video_pixel_noise")),
            video_gain_noise=float(self.get("synth.video_gain_noise")),
            illum_drift_amp=float(self.get("synth.illum_drift_amp")),
            rf_noise=float(self.get("synth.rf_noise")),
            tone_bias=float(self.get("synth.tone_bias")),
            rf_mode=str(self.get("synth.rf_mode")),
            skin_region=_default_skin_region(int(self.get("synth.height")),
                                             int(self.get("synth.width"))),
        )


def _default_skin_region(height: int, width: int):
    return (height // 4, width // 4, 3 * height // 4, 3 * width // 4)
