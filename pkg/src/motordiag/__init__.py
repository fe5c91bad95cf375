"""Acoustic electric-motor fault detection with a deep MLP and an MCMC-sampled BNN."""

from .audio import AudioClip, ClassLabel, LabeledDataset, load_dataset, load_wav, segment
from .bnn import (
    BnnSpec, PosteriorEnsemble, posterior_predictive, sample_posterior_hmc, sample_posterior_mh,
)
from .dnn import DnnTrainConfig, build_dnn, predict_dnn, train_dnn
from .evaluation import ModelKind, confusion, emit_report, imbalance_experiment, run_trials, split
from .spectral import (
    FeatureVector, band_limit, fft, magnitude_spectrum, normalize_dataset, pool_to_features,
)
from .synth import SynthSpec, gen_clip, gen_dataset, write_dataset

__version__ = "0.1.0"

__all__ = [
    "AudioClip", "ClassLabel", "LabeledDataset", "load_dataset", "load_wav", "segment",
    "BnnSpec", "PosteriorEnsemble", "posterior_predictive", "sample_posterior_hmc",
    "sample_posterior_mh", "DnnTrainConfig", "build_dnn", "predict_dnn", "train_dnn",
    "ModelKind", "confusion", "emit_report", "imbalance_experiment", "run_trials", "split",
    "FeatureVector", "band_limit", "fft", "magnitude_spectrum", "normalize_dataset",
    "pool_to_features", "SynthSpec", "gen_clip", "gen_dataset", "write_dataset",
]
