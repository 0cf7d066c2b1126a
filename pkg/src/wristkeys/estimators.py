"""scikit-learn style wrappers around the pipeline stages.

Every stage is an estimator with get_params/set_params, so the chain composes
with sklearn.pipeline.Pipeline and hyperparameter search. The transformers
are causal per-sample operations: fit is a no-op that returns self.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .augment import AcmConfig, acm_apply, acm_sample_masks
from .decode import DEFAULT_BLANK_INDEX, DEFAULT_CHARSET, DecodeConfig, beam_search, greedy_decode, load_charlm
from .encoder import ModelConfig, WeightStore, encode
from .frontend import extract_features
from .io import load_checkpoint
from .normalize import RtnConfig, rtn_batch
from .validation import N_CHANNELS, N_HANDS


class SpectrogramFrontend(BaseEstimator, TransformerMixin):
    """Raw EMG [T, 2, 16] to causal log-power features [T_frames, 2, 16, F]."""

    def __init__(self, n_fft=64, hop=16, reduce_bands=True):
        self.n_fft = n_fft
        self.hop = hop
        self.reduce_bands = reduce_bands

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return extract_features(X, n_fft=self.n_fft, hop=self.hop, reduce_bands=self.reduce_bands)


class RollingTimeNormalizer(BaseEstimator, TransformerMixin):
    """Causal per-feature z-scoring; statistics restart for every sample."""

    def __init__(self, warmup_frames=125, epsilon=1e-6, window=None):
        self.warmup_frames = warmup_frames
        self.epsilon = epsilon
        self.window = window

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        config = RtnConfig(warmup_frames=self.warmup_frames, epsilon=self.epsilon, window=self.window)
        return rtn_batch(np.asarray(X, dtype=np.float64), config)


class ChannelMasker(BaseEstimator, TransformerMixin):
    """Training-time channel masking; every transform call is a new mini-batch."""

    def __init__(self, apply_probability=2.0 / 3.0, n_masks_support=(0, 1, 2), f_max=12,
                 num_bands=6, mask_value="zero", stage="post_rsg", seed=0):
        self.apply_probability = apply_probability
        self.n_masks_support = n_masks_support
        self.f_max = f_max
        self.num_bands = num_bands
        self.mask_value = mask_value
        self.stage = stage
        self.seed = seed

    def _config(self) -> AcmConfig:
        return AcmConfig(
            apply_probability=self.apply_probability,
            n_masks_support=tuple(self.n_masks_support),
            f_max=self.f_max,
            num_bands=self.num_bands,
            mask_value=self.mask_value,
            stage=self.stage,
        )

    def fit(self, X, y=None):
        self.n_batches_ = 0
        return self

    def transform(self, X):
        if not hasattr(self, "n_batches_"):
            self.n_batches_ = 0
        arr = np.asarray(X, dtype=np.float64)
        n_samples = 1 if arr.ndim == 4 else arr.shape[0]
        masks = acm_sample_masks(
            self._config(), N_HANDS * N_CHANNELS, self.seed,
            n_samples=n_samples, batch_index=self.n_batches_,
        )
        self.n_batches_ += 1
        return acm_apply(arr, masks, self._config())


class EmgEncoder(BaseEstimator, TransformerMixin):
    """Normalized features to per-frame CTC logits, weights from a checkpoint."""

    def __init__(self, checkpoint=None, config=None, weights=None):
        self.checkpoint = checkpoint
        self.config = config
        self.weights = weights

    def _resolve(self) -> tuple[ModelConfig, WeightStore]:
        if self.checkpoint is not None:
            return load_checkpoint(self.checkpoint)
        if self.config is None or self.weights is None:
            raise ValueError("EmgEncoder needs either checkpoint= or both config= and weights=")
        return self.config, self.weights

    def fit(self, X, y=None):
        self.model_ = self._resolve()
        return self

    def transform(self, X):
        config, weights = getattr(self, "model_", None) or self._resolve()
        return encode(np.asarray(X, dtype=np.float64), config, weights).logits


class CtcDecoder(BaseEstimator):
    """Logits to keystroke strings; greedy without an LM, beam search with one."""

    def __init__(self, lm_path=None, beam_size=50, lm_weight=1.5, insertion_bonus=0.5,
                 blank_index=DEFAULT_BLANK_INDEX, symbols=DEFAULT_CHARSET):
        self.lm_path = lm_path
        self.beam_size = beam_size
        self.lm_weight = lm_weight
        self.insertion_bonus = insertion_bonus
        self.blank_index = blank_index
        self.symbols = symbols

    def fit(self, X, y=None):
        self.lm_ = load_charlm(self.lm_path) if self.lm_path is not None else None
        return self

    def predict(self, X):
        lm = getattr(self, "lm_", None)
        if lm is None and self.lm_path is not None:
            lm = load_charlm(self.lm_path)
        arr = np.asarray(X, dtype=np.float64)
        single = arr.ndim == 2
        batches = [arr] if single else list(arr)
        config = DecodeConfig(
            beam_size=self.beam_size, lm_weight=self.lm_weight,
            insertion_bonus=self.insertion_bonus, blank_index=self.blank_index,
        )
        out = []
        for logits in batches:
            if lm is None:
                out.append(greedy_decode(logits, self.blank_index, self.symbols))
            else:
                out.append(beam_search(logits, lm, config, self.symbols))
        return out[0] if single else out
