"""RGB + RF fusion for remote heart-rate estimation.

State-space sequence kernels, modality-specific temporal blocks, shared-state
bidirectional token interaction, channel-frequency mixing, pulse losses and
metrics, a synthetic paired-data generator, and the training/evaluation
pipeline behind both a scikit-learn style estimator and a CLI.
"""

from .config import RunConfig
from .errors import (CheckpointError, ConfigError, DataError, DegenerateSignalError,
                     DivergenceError, InvalidInputError, InvalidParameterError,
                     NoPeakError, RoiDetectionError, SchemaError, SplitError)
from .estimator import PulseFusionRegressor, check_sessions
from .evaluate import EvalReport, ablate, evaluate, evaluate_checkpoint, predict_session
from .losses import LossConfig, batch_total_loss, neg_pearson_loss, snr_loss, total_loss
from .metrics import (BVPSignal, BlandAltman, MetricsReport, bland_altman,
                      compute_metrics, estimate_hr)
from .model import ABLATION_TOGGLES, FusionNet, ModelConfig
from .radar import RadarParams, RangeMatrix, range_to_series, rf_range_matrix
from .report import render_report_dir, write_reports
from .session_io import load_dataset, load_session, save_dataset, save_session
from .splits import Folds, split_dataset
from .ssm_linear import (ConvKernel, DiscreteSSM, SSMParams, apply_conv,
                         build_conv_kernel, scan_recurrent, zoh_discretize)
from .synth import RFSeries, Session, SynthConfig, VideoClip, synth_dataset, synth_session
from .train import TrainResult, load_checkpoint, train

__version__ = "0.1.0"
