"""Input validation helpers shared across the pipeline stages."""

from __future__ import annotations

import numpy as np

N_HANDS = 2
N_CHANNELS = 16
SAMPLE_RATE_HZ = 2000
FRAMES_PER_SECOND = 125


def as_float_array(x, name: str = "input") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf values")
    return arr


def check_emg_window(x, name: str = "emg window") -> np.ndarray:
    """Validate a raw EMG array of shape [T_samples, 2 hands, 16 channels]."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"{name} must be 3-dimensional [T, {N_HANDS}, {N_CHANNELS}], got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError("empty signal")
    if arr.shape[1] != N_HANDS or arr.shape[2] != N_CHANNELS:
        raise ValueError(
            f"{name} must have {N_HANDS} hand bands x {N_CHANNELS} channels, got shape {arr.shape}"
        )
    return arr


def check_feature_tensor(x, n_freqs: int | None = None, name: str = "feature tensor") -> np.ndarray:
    """Validate a time-major feature array [T, 2 hands, 16 channels, F]."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 4:
        raise ValueError(f"{name} must be 4-dimensional [T, {N_HANDS}, {N_CHANNELS}, F], got shape {arr.shape}")
    if arr.shape[1] != N_HANDS or arr.shape[2] != N_CHANNELS:
        raise ValueError(
            f"{name} must have {N_HANDS} hand bands x {N_CHANNELS} channels, got shape {arr.shape}"
        )
    if n_freqs is not None and arr.shape[3] != n_freqs:
        raise ValueError(f"{name} must have F={n_freqs} spectral bins, got F={arr.shape[3]}")
    return arr


def check_logits(x, name: str = "logits") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional [T, vocab], got shape {arr.shape}")
    if arr.shape[1] < 2:
        raise ValueError(f"{name} needs a vocabulary of at least 2 (one symbol plus blank)")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf values")
    return arr
