"""Calibration of classifier outputs with adaptive test-time augmentation.

M-ATTA and V-ATTA blend a model's original prediction with weighted
softmaxes of its logits on augmented inputs while never changing the
predicted class. Temperature scaling, isotonic regression and histogram
binning are included as baselines, together with Brier, multi-class Brier,
ECE and NLL metrics.
"""
from .atta import MattaParams, VattaParams, adaptive_omega, matta_fuse, predict, vatta_fuse
from .baselines import (
    BinningParams,
    TemperatureParams,
    apply_binning,
    apply_temperature,
    fit_histogram_binning,
    fit_isotonic,
    fit_temperature,
)
from .calibrators import MATTA, VATTA, HistogramBinning, IsotonicCalibration, TemperatureScaling
from .core import Dataset, InvalidInputError, Sample, aggregate_logits, argmax_index, softmax
from .metrics import CalibrationReport, accuracy, brier, calibration_report, ece, mc_brier, nll
from .optim import FitConfig, fit
from .synth import SynthSpec, generate

__version__ = "0.1.0"
