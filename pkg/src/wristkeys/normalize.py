"""Causal per-feature z-scoring with cumulative statistics (rolling time normalization).

Every feature slot (hand band x channel x spectral bin) keeps its own running
mean and variance. During a warm-up of `warmup_frames` frames the statistics
are frozen to those of the whole warm-up window, which is the only causal
reading of that contract: the first frames are buffered and emitted together
once the warm-up completes. After warm-up the statistics are cumulative over
all frames seen so far (including the current one), or over a trailing window
in the sliding variants.

Running moments use Welford updates rather than raw power sums: they are
numerically stable and keep the numerator exactly zero for constant inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_WARMUP_FRAMES = 125
DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class RtnConfig:
    """Normalizer settings.

    window=None gives cumulative statistics; window=W (frames) switches to a
    trailing window of W frames once more than W frames have been seen.
    """

    warmup_frames: int = DEFAULT_WARMUP_FRAMES
    epsilon: float = DEFAULT_EPSILON
    window: int | None = None

    def __post_init__(self):
        if self.warmup_frames < 1:
            raise ValueError("warmup_frames must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.window is not None and self.window < self.warmup_frames:
            raise ValueError("sliding window must span at least warmup_frames frames")


@dataclass
class RtnState:
    """Per-stream running statistics. Single writer; one instance per stream."""

    config: RtnConfig
    feature_shape: tuple[int, ...]
    count: int = 0
    mean: np.ndarray = field(default=None)  # Welford running mean over all frames
    m2: np.ndarray = field(default=None)  # sum of squared deviations from the mean
    frozen_mu: np.ndarray | None = None
    frozen_sigma: np.ndarray | None = None
    _warmup_buffer: list = field(default_factory=list)
    # sliding mode: trailing window of raw frames plus shifted running sums
    _ring: list = field(default_factory=list)
    _shift: np.ndarray | None = None
    _win_sum: np.ndarray | None = None
    _win_sumsq: np.ndarray | None = None

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.feature_shape)
        if self.m2 is None:
            self.m2 = np.zeros(self.feature_shape)

    @property
    def sum(self) -> np.ndarray:
        """Equivalent running sum of x (derived from the Welford moments)."""
        return self.mean * self.count

    @property
    def sum_sq(self) -> np.ndarray:
        """Equivalent running sum of x^2 (derived from the Welford moments)."""
        return self.m2 + self.count * self.mean**2

    @property
    def in_warmup(self) -> bool:
        return self.frozen_mu is None


def rtn_init(config: RtnConfig, feature_shape: tuple[int, ...]) -> RtnState:
    """Fresh state with zeroed sums for the given per-frame feature shape."""
    return RtnState(config=config, feature_shape=tuple(feature_shape))


def _cumulative_sigma(state: RtnState) -> np.ndarray:
    var = np.maximum(state.m2 / state.count, 0.0)
    return np.sqrt(var + state.config.epsilon)


def _freeze_warmup(state: RtnState) -> np.ndarray:
    """Freeze warm-up statistics and emit the buffered frames together."""
    state.frozen_mu = state.mean.copy()
    state.frozen_sigma = _cumulative_sigma(state)
    buffered = np.stack(state._warmup_buffer)
    state._warmup_buffer = []
    if state.config.window is not None:
        # Shift by the frozen mean so the windowed sums stay small and are
        # exactly zero for constant streams.
        state._shift = state.frozen_mu
        shifted = np.stack(state._ring) - state._shift
        state._win_sum = shifted.sum(axis=0)
        state._win_sumsq = (shifted**2).sum(axis=0)
    return (buffered - state.frozen_mu) / state.frozen_sigma


def rtn_step(state: RtnState, frame: np.ndarray) -> tuple[RtnState, np.ndarray]:
    """Push one frame; returns (state, emitted) where emitted is [k, *features].

    k is 0 while the warm-up buffer is filling, `warmup_frames` on the frame
    that completes the warm-up, and 1 for every frame after that.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != state.feature_shape:
        raise ValueError(f"frame shape {frame.shape} does not match state shape {state.feature_shape}")
    cfg = state.config

    state.count += 1
    delta = frame - state.mean
    state.mean = state.mean + delta / state.count
    state.m2 = state.m2 + delta * (frame - state.mean)

    if cfg.window is not None:
        state._ring.append(frame.copy())
        if state._shift is not None:
            shifted = frame - state._shift
            state._win_sum = state._win_sum + shifted
            state._win_sumsq = state._win_sumsq + shifted**2
        if len(state._ring) > cfg.window:
            evicted = state._ring.pop(0) - state._shift
            state._win_sum = state._win_sum - evicted
            state._win_sumsq = state._win_sumsq - evicted**2

    if state.in_warmup:
        state._warmup_buffer.append(frame.copy())
        if state.count < cfg.warmup_frames:
            return state, np.zeros((0,) + state.feature_shape)
        return state, _freeze_warmup(state)

    if cfg.window is None:
        mu, sigma = state.mean, _cumulative_sigma(state)
    else:
        n = len(state._ring)
        mu = state._shift + state._win_sum / n
        var = np.maximum(state._win_sumsq / n - (state._win_sum / n) ** 2, 0.0)
        sigma = np.sqrt(var + cfg.epsilon)
    return state, ((frame - mu) / sigma)[None]


def rtn_finish(state: RtnState) -> np.ndarray:
    """Flush a stream that ended before the warm-up completed.

    The buffered frames are normalized with statistics over the frames
    actually seen. No-op (empty emission) after a completed warm-up.
    """
    if not state.in_warmup or state.count == 0:
        return np.zeros((0,) + state.feature_shape)
    return _freeze_warmup(state)


def rtn_batch(frames: np.ndarray, config: RtnConfig | None = None) -> np.ndarray:
    """Normalize a whole [T, *features] tensor; equivalent to folding rtn_step."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[0] < 1:
        raise ValueError("need at least one frame")
    if config is None:
        config = RtnConfig()
    state = rtn_init(config, frames.shape[1:])
    chunks = []
    for t in range(frames.shape[0]):
        state, emitted = rtn_step(state, frames[t])
        if emitted.size:
            chunks.append(emitted)
    tail = rtn_finish(state)
    if tail.size:
        chunks.append(tail)
    return np.concatenate(chunks, axis=0)
