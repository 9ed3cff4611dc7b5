"""AWGN channel parameterized by peak-SNR, and receiver-side gain compensation."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError
from .frontend import HpaParams

__all__ = ["ChannelParams", "noise_std", "awgn", "compensate"]


@dataclass(frozen=True)
class ChannelParams:
    """Peak signal-to-noise ratio a0^2/sigma_w^2 in dB; +inf disables noise."""

    p_snr_db: float
    rng_seed: int = 0


def noise_std(ch: ChannelParams, hpa: HpaParams) -> float:
    """Total complex noise standard deviation sigma_w (variance a0^2/P_SNR)."""
    if math.isinf(ch.p_snr_db):
        return 0.0
    return hpa.a0 * 10.0 ** (-ch.p_snr_db / 20.0)


def awgn(wave: np.ndarray, ch: ChannelParams, hpa: HpaParams,
         rng: np.random.Generator | None = None) -> np.ndarray:
    """Add circularly-symmetric complex Gaussian noise of variance sigma_w^2.

    Deterministic for a fixed seed: when no generator is supplied a fresh one
    is built from ch.rng_seed, so repeated calls give bit-identical output.
    """
    wave = np.asarray(wave, dtype=complex)
    sigma = noise_std(ch, hpa)
    if sigma == 0.0:
        return wave.copy()
    if rng is None:
        rng = np.random.default_rng(ch.rng_seed)
    scale = sigma / np.sqrt(2.0)
    noise = rng.standard_normal(wave.shape) * scale \
        + 1j * (rng.standard_normal(wave.shape) * scale)
    return wave + noise


def compensate(wave: np.ndarray, alpha: complex) -> np.ndarray:
    """Divide every sample by the Bussgang gain alpha."""
    if alpha == 0:
        raise DegenerateInputError("compensation gain alpha is zero")
    return np.asarray(wave, dtype=complex) / alpha
