"""Model-driven PAPR-reduction baselines: clipping-and-filtering and selective mapping."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError
from .metrics import papr
from .ofdm import bpf, ofdm_modulate

__all__ = [
    "CfParams",
    "SlmParams",
    "clip_amplitude",
    "clip_filter",
    "slm_phase_bank",
    "slm_select",
    "slm_select_batch",
]


@dataclass(frozen=True)
class CfParams:
    """Clipping ratio in dB above the waveform RMS, and clip/filter iterations."""

    clip_ratio_db: float = 1.58
    iterations: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")


@dataclass(frozen=True)
class SlmParams:
    """Number of candidate phase sequences and the seed that generates them."""

    num_sequences: int = 128
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_sequences < 1:
            raise ValueError(f"num_sequences must be >= 1, got {self.num_sequences}")


def clip_amplitude(wave: np.ndarray, a_clip: np.ndarray) -> np.ndarray:
    """Limit sample amplitudes to a_clip, preserving phase.

    a_clip broadcasts against the waveform, so a per-row threshold of shape
    (..., 1) clips each waveform of a batch at its own level.
    """
    wave = np.asarray(wave, dtype=complex)
    mag = np.abs(wave)
    safe = np.where(mag > 0, mag, 1.0)
    return np.where(mag <= a_clip, wave, wave * (a_clip / safe))


def clip_filter(wave: np.ndarray, cf: CfParams = CfParams(), oversampling: int = 4) -> np.ndarray:
    """Iterated amplitude clipping and band-pass filtering.

    Each iteration clips at RMS * 10^(clip_ratio_db/20) (RMS taken per
    waveform) and re-filters to the data bandwidth.  The result is
    renormalized to unit mean power per waveform so every method feeds the
    back-off stage at the same level.
    """
    out = np.asarray(wave, dtype=complex)
    if np.any(np.mean(np.abs(out) ** 2, axis=-1) <= 0.0):
        raise DegenerateInputError("cannot clip an all-zero waveform")
    ratio = 10.0 ** (cf.clip_ratio_db / 20.0)
    for _ in range(cf.iterations):
        rms = np.sqrt(np.mean(np.abs(out) ** 2, axis=-1, keepdims=True))
        out = clip_amplitude(out, rms * ratio)
        out = bpf(out, oversampling)
    return out / np.sqrt(np.mean(np.abs(out) ** 2, axis=-1, keepdims=True))


def slm_phase_bank(n_subcarriers: int, slm: SlmParams) -> np.ndarray:
    """Candidate phase sequences, shape (U, N) with entries in {1, -1, j, -j}.

    Row 0 is all ones, so the unmodified waveform is always a candidate and
    selection can never increase the PAPR.  Remaining rows are i.i.d. draws
    from the seeded generator; nested banks share a prefix, i.e. the first U
    rows of a larger bank equal the U-sequence bank for the same seed.
    """
    rng = np.random.default_rng(slm.rng_seed)
    bank = np.ones((slm.num_sequences, n_subcarriers), dtype=complex)
    if slm.num_sequences > 1:
        exponents = rng.integers(0, 4, size=(slm.num_sequences - 1, n_subcarriers))
        bank[1:] = 1j ** exponents
    return bank


def slm_select(block: np.ndarray, slm: SlmParams = SlmParams(),
               oversampling: int = 4) -> tuple[np.ndarray, int]:
    """Pick the lowest-PAPR candidate among phase-rotated versions of a block.

    Returns the selected time-domain waveform and the candidate index; the
    receiver is assumed to know the index.  Ties go to the lowest index.
    """
    block = np.asarray(block, dtype=complex)
    bank = slm_phase_bank(block.shape[-1], slm)
    candidates = ofdm_modulate(block[None, :] * bank, oversampling)
    idx = int(np.argmin(papr(candidates)))
    return candidates[idx], idx


def slm_select_batch(blocks: np.ndarray, slm: SlmParams = SlmParams(),
                     oversampling: int = 4, chunk: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`slm_select` over a batch of blocks.

    Candidate evaluation is chunked to bound memory; the selection per block
    is identical to the single-block function.
    """
    blocks = np.atleast_2d(np.asarray(blocks, dtype=complex))
    batch, n = blocks.shape
    bank = slm_phase_bank(n, slm)
    waves = np.empty((batch, n * oversampling), dtype=complex)
    indices = np.empty(batch, dtype=np.int64)
    for start in range(0, batch, chunk):
        part = blocks[start:start + chunk]
        candidates = ofdm_modulate(part[:, None, :] * bank[None, :, :], oversampling)
        sel = np.argmin(papr(candidates), axis=-1)
        waves[start:start + chunk] = candidates[np.arange(len(part)), sel]
        indices[start:start + chunk] = sel
    return waves, indices
