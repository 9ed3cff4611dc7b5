"""paprlab: simulation lab for low-PAPR OFDM waveform design.

An end-to-end OFDM chain with a RAPP power amplifier, a trainable
convolutional autoencoder transmitter/receiver, classical
clipping-and-filtering and selective-mapping baselines, and the metrics
(PAPR, CCDF, PSD, ACPR, OBO, BER) to compare them.
"""

from .baselines import CfParams, SlmParams, clip_filter, slm_select
from .channel import ChannelParams, awgn, compensate
from .errors import ConfigError, DegenerateInputError, TrainingDivergedError
from .frontend import HpaParams, apply_ibo, bussgang_alpha, rapp_amplify
from .losses import LossWeights, joint_loss
from .metrics import SpectralParams, acpr, ber, ccdf, obo, papr, papr_db, psd
from .models import CaeModel, FcAeModel, load_checkpoint, save_checkpoint
from .ofdm import (
    ConstellationSpec,
    bpf,
    ml_detect,
    ofdm_demodulate,
    ofdm_modulate,
    power_normalize,
    qam4_constellation,
    qam4_map,
)
from .training import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "CfParams", "SlmParams", "clip_filter", "slm_select",
    "ChannelParams", "awgn", "compensate",
    "ConfigError", "DegenerateInputError", "TrainingDivergedError",
    "HpaParams", "apply_ibo", "bussgang_alpha", "rapp_amplify",
    "LossWeights", "joint_loss",
    "SpectralParams", "acpr", "ber", "ccdf", "obo", "papr", "papr_db", "psd",
    "CaeModel", "FcAeModel", "load_checkpoint", "save_checkpoint",
    "ConstellationSpec", "bpf", "ml_detect", "ofdm_demodulate", "ofdm_modulate",
    "power_normalize", "qam4_constellation", "qam4_map",
    "TrainConfig", "train",
    "__version__",
]
