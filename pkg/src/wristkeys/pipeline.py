"""End-to-end drivers: whole-session batch decoding and the streaming path.

Sessions are always processed as one sample (no chunking), so the language
model keeps its full character history. The streaming path feeds raw samples
through an incremental spectrogram, incremental normalization, and encoder
ring buffers; its logits match the batch path to well below the 1e-5
equivalence budget.
"""

from __future__ import annotations


import numpy as np

from .decode import CharLm, DecodeConfig, DEFAULT_CHARSET, beam_search, greedy_decode
from .encoder import EncoderStream, ModelConfig, WeightStore, encode
from .frontend import StreamingSpectrogram, extract_features
from .io import NumericError, SessionRecord
from .metrics import CerBreakdown, cer
from .normalize import RtnConfig, rtn_batch, rtn_finish, rtn_init, rtn_step


def compute_logits(
    session: SessionRecord,
    config: ModelConfig,
    weights: WeightStore,
    rtn_config: RtnConfig | None = None,
) -> np.ndarray:
    """Frontend -> normalization -> encoder for a whole session."""
    reduce_bands = config.n_freqs == 6
    if not reduce_bands and config.n_freqs != 33:
        raise ValueError(f"encoder expects 6 or 33 spectral bins, config says {config.n_freqs}")
    features = extract_features(session.emg.astype(np.float64), reduce_bands=reduce_bands)
    normalized = rtn_batch(features, rtn_config or RtnConfig())
    logits = encode(normalized, config, weights).logits
    if not np.all(np.isfinite(logits)):
        raise NumericError("encoder produced non-finite logits")
    return logits


def run_pipeline(
    session: SessionRecord,
    checkpoint: tuple[ModelConfig, WeightStore],
    decode_config: DecodeConfig | None = None,
    lm: CharLm | None = None,
    rtn_config: RtnConfig | None = None,
    symbols=DEFAULT_CHARSET,
) -> tuple[str, CerBreakdown]:
    """Decode one session and score it against its own labels.

    Greedy CTC decoding when no language model is supplied, beam search
    otherwise. Returns the decoded keystrokes and the CER breakdown.
    """
    config, weights = checkpoint
    decode_config = decode_config or DecodeConfig()
    logits = compute_logits(session, config, weights, rtn_config)
    if lm is None:
        keystrokes = greedy_decode(logits, decode_config.blank_index, symbols)
    else:
        keystrokes = beam_search(logits, lm, decode_config, symbols)
    return keystrokes, cer(session.reference_keystrokes, keystrokes)


class StreamingPipeline:
    """Frame-at-a-time decoding front: raw samples in, logit frames out."""

    def __init__(
        self,
        config: ModelConfig,
        weights: WeightStore,
        rtn_config: RtnConfig | None = None,
    ):
        reduce_bands = config.n_freqs == 6
        if not reduce_bands and config.n_freqs != 33:
            raise ValueError(f"encoder expects 6 or 33 spectral bins, config says {config.n_freqs}")
        self._spectrogram = StreamingSpectrogram(reduce_bands=reduce_bands)
        self._rtn = rtn_init(rtn_config or RtnConfig(), (2, 16, config.n_freqs))
        self._encoder = EncoderStream(config, weights)
        self._vocab = config.vocab_size

    def _advance(self, feature_frames: np.ndarray) -> np.ndarray:
        logit_frames = []
        for frame in feature_frames:
            _, emitted = rtn_step(self._rtn, frame)
            for normalized in emitted:
                logit_frames.append(self._encoder.push(normalized))
        if not logit_frames:
            return np.zeros((0, self._vocab))
        return np.stack(logit_frames)

    def push_samples(self, samples: np.ndarray) -> np.ndarray:
        """Feed raw EMG samples [n, 2, 16]; returns completed logit frames [k, V]."""
        return self._advance(self._spectrogram.push(samples))

    def finish(self) -> np.ndarray:
        """Flush the partial trailing frame and any buffered warm-up frames."""
        logit_frames = [self._advance(self._spectrogram.flush())]
        tail = rtn_finish(self._rtn)
        for normalized in tail:
            logit_frames.append(self._encoder.push(normalized)[None])
        return np.concatenate(logit_frames, axis=0)


def stream_session_logits(
    session: SessionRecord,
    config: ModelConfig,
    weights: WeightStore,
    rtn_config: RtnConfig | None = None,
    chunk_samples: int = 160,
) -> np.ndarray:
    """Run a whole session through the streaming path in fixed-size chunks."""
    pipe = StreamingPipeline(config, weights, rtn_config)
    chunks = []
    emg = session.emg.astype(np.float64)
    for start in range(0, emg.shape[0], chunk_samples):
        chunks.append(pipe.push_samples(emg[start : start + chunk_samples]))
    chunks.append(pipe.finish())
    logits = np.concatenate(chunks, axis=0)
    if not np.all(np.isfinite(logits)):
        raise NumericError("encoder produced non-finite logits")
    return logits
