"""Scikit-learn style estimator facade over the training and inference
pipeline, so the model composes with standard tooling (get_params/set_params,
fit/predict/score)."""

from __future__ import annotations

import inspect
import tempfile
from typing import List, Optional, Sequence

import numpy as np

from .config import RunConfig
from .errors import InvalidInputError
from .evaluate import predict_session
from .metrics import estimate_hr
from .splits import Folds
from .synth import Session
from .train import train


def check_sessions(X: Sequence[Session]) -> List[Session]:
    """Validate a session collection: type, non-empty, consistent rates and
    RF channel counts."""
    sessions = list(X)
    if not sessions:
        raise InvalidInputError("expected a non-empty sequence of Session objects")
    for s in sessions:
        if not isinstance(s, Session):
            raise InvalidInputError(f"expected Session, got {type(s).__name__}")
    fps = sessions[0].video.fps
    rf_rate = sessions[0].rf.sample_rate
    rf_channels = sessions[0].rf.data.shape[0]
    for s in sessions[1:]:
        if s.video.fps != fps or s.rf.sample_rate != rf_rate:
            raise InvalidInputError("sessions mix different frame or RF rates")
        if s.rf.data.shape[0] != rf_channels:
            raise InvalidInputError("sessions mix different RF channel counts")
    return sessions


class PulseFusionRegressor:
    """Heart-rate regressor over paired video + RF sessions.

    fit() trains the fusion network on the given sessions; predict() returns
    one bpm estimate per session. Parameters follow scikit-learn conventions:
    everything set in __init__ is reported by get_params and clonable through
    set_params.
    """

    def __init__(self, stem_width: int = 8, token_width: int = 16, state_size: int = 16,
                 tdmm_blocks: int = 1, epochs: int = 30, lr: float = 1e-4,
                 batch_size: int = 4, window_s: float = 3.0, snr_weight: float = 0.1,
                 modality_dropout: float = 0.25, mode: str = "both", seed: int = 0,
                 band_lo: float = 0.6, band_hi: float = 3.3,
                 out_dir: Optional[str] = None):
        self.stem_width = stem_width
        self.token_width = token_width
        self.state_size = state_size
        self.tdmm_blocks = tdmm_blocks
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.window_s = window_s
        self.snr_weight = snr_weight
        self.modality_dropout = modality_dropout
        self.mode = mode
        self.seed = seed
        self.band_lo = band_lo
        self.band_hi = band_hi
        self.out_dir = out_dir

    @classmethod
    def _param_names(cls) -> List[str]:
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "PulseFusionRegressor":
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise InvalidInputError(
                    f"invalid parameter {key!r} for PulseFusionRegressor")
            setattr(self, key, value)
        return self

    def _run_config(self, sessions: Sequence[Session]) -> RunConfig:
        fps = sessions[0].video.fps
        out_dir = self.out_dir or tempfile.mkdtemp(prefix="pulsefusion_")
        return RunConfig({
            "run.out_dir": out_dir,
            "run.seed": self.seed,
            "data.fps": fps,
            "data.rf_rate": sessions[0].rf.sample_rate,
            "model.stem_width": self.stem_width,
            "model.token_width": self.token_width,
            "model.state_size": self.state_size,
            "model.tdmm_blocks": self.tdmm_blocks,
            "loss.snr_weight": self.snr_weight,
            "loss.band_lo": self.band_lo,
            "loss.band_hi": self.band_hi,
            "eval.band_lo": self.band_lo,
            "eval.band_hi": self.band_hi,
            "train.epochs": self.epochs,
            "train.lr": self.lr,
            "train.batch_size": self.batch_size,
            "train.window_s": self.window_s,
            "train.modality_dropout": self.modality_dropout,
        })

    def fit(self, X: Sequence[Session], y=None) -> "PulseFusionRegressor":
        sessions = check_sessions(X)
        cfg = self._run_config(sessions)
        folds = Folds(train=sessions, val=sessions[: min(2, len(sessions))], test=[])
        result = train(cfg, folds=folds)
        self.model_ = result.model
        self.history_ = result.history
        self.config_ = cfg
        return self

    def predict(self, X: Sequence[Session]) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise InvalidInputError("estimator is not fitted; call fit() first")
        sessions = check_sessions(X)
        out = []
        for s in sessions:
            bvp = predict_session(self.model_, s, self.mode)
            out.append(estimate_hr(bvp, s.video.fps, (self.band_lo, self.band_hi)))
        return np.asarray(out, dtype=np.float64)

    def score(self, X: Sequence[Session], y: Optional[Sequence[float]] = None) -> float:
        """Negative MAE in bpm against y, or against each session's own
        reference pulse when y is omitted."""
        sessions = check_sessions(X)
        pred = self.predict(sessions)
        if y is None:
            y = [estimate_hr(s.ppg_gt, band=(self.band_lo, self.band_hi))
                 for s in sessions]
        y = np.asarray(y, dtype=np.float64)
        if y.shape[0] != pred.shape[0]:
            raise InvalidInputError("y length does not match the session count")
        return -float(np.mean(np.abs(pred - y)))
