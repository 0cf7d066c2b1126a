"""Causal log-power spectrogram frontend with log-spaced band reduction.

Raw two-band wrist EMG sampled at 2 kHz is framed causally (one frame per
hop, zero lookahead), transformed with a short FFT, and compressed to
log10(|X|^2 + 1e-6).  The 33 FFT bins can then be aggregated into 6 broad,
roughly log-spaced bands by summing the log-power values of the member bins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import N_CHANNELS, N_HANDS, SAMPLE_RATE_HZ, check_emg_window, check_feature_tensor

DEFAULT_N_FFT = 64
DEFAULT_HOP = 16
LOG_EPS = 1e-6

# Band edges in Hz. The first interval includes its lower edge; all upper
# edges are inclusive, so a bin centered on a shared edge joins the lower band.
BAND_EDGES_HZ: tuple[tuple[float, float], ...] = (
    (31.25, 62.5),
    (62.5, 125.0),
    (125.0, 250.0),
    (250.0, 375.0),
    (375.0, 687.5),
    (687.5, 1000.0),
)
N_BANDS = len(BAND_EDGES_HZ)


@dataclass(frozen=True)
class RawEmgWindow:
    """Raw EMG snippet: [T_samples, 2 hand bands, 16 channels] at 2 kHz."""

    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE_HZ

    def __post_init__(self):
        object.__setattr__(self, "samples", check_emg_window(self.samples))
        if self.sample_rate_hz != SAMPLE_RATE_HZ:
            raise ValueError(f"unsupported sample rate {self.sample_rate_hz}, expected {SAMPLE_RATE_HZ}")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class Spectrogram:
    """Log-power spectrogram frames: [T_frames, 2 hands, 16 channels, F]."""

    values: np.ndarray
    frame_hop_samples: int = DEFAULT_HOP
    n_fft: int = DEFAULT_N_FFT

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_freqs(self) -> int:
        return self.values.shape[-1]


@dataclass(frozen=True)
class BandMap:
    """Assignment of FFT bins 1..32 onto 6 spectral bands (DC bin unassigned)."""

    edges_hz: tuple[tuple[float, float], ...]
    bin_to_band: np.ndarray  # length 33; -1 for unassigned, else band index 0..5
    members: tuple[tuple[int, ...], ...] = field(default=())

    @property
    def n_bands(self) -> int:
        return len(self.edges_hz)

    def band_of(self, fft_bin: int) -> int:
        """Band index (0-based) of an FFT bin, or -1 if unassigned."""
        return int(self.bin_to_band[fft_bin])


def build_band_map(n_fft: int = DEFAULT_N_FFT, sample_rate_hz: int = SAMPLE_RATE_HZ) -> BandMap:
    """Assign each FFT bin to its spectral band by center frequency.

    A bin with center frequency f joins band b when f lies in
    (lower_b, upper_b]; the first band additionally includes its lower edge.
    The DC bin is assigned to no band.
    """
    n_bins = n_fft // 2 + 1
    bin_hz = sample_rate_hz / n_fft
    assignment = np.full(n_bins, -1, dtype=np.int64)
    for f in range(1, n_bins):
        center = f * bin_hz
        for b, (lo, hi) in enumerate(BAND_EDGES_HZ):
            lower_ok = center >= lo if b == 0 else center > lo
            if lower_ok and center <= hi:
                assignment[f] = b
                break
    members = tuple(
        tuple(int(f) for f in np.nonzero(assignment == b)[0]) for b in range(N_BANDS)
    )
    return BandMap(edges_hz=BAND_EDGES_HZ, bin_to_band=assignment, members=members)


def _frame_signal(samples: np.ndarray, n_fft: int, hop: int) -> np.ndarray:
    """Causal framing: frame t covers samples [hop*t - (n_fft-hop), hop*t + hop - 1].

    Left padding of n_fft-hop zeros guarantees one frame per hop and zero
    lookahead; the tail is zero-padded up to a whole number of hops.
    """
    t_samples = samples.shape[0]
    n_frames = -(-t_samples // hop)  # ceil division
    pad_left = n_fft - hop
    pad_right = n_frames * hop - t_samples
    padded = np.concatenate(
        [
            np.zeros((pad_left,) + samples.shape[1:], dtype=samples.dtype),
            samples,
            np.zeros((pad_right,) + samples.shape[1:], dtype=samples.dtype),
        ],
        axis=0,
    )
    starts = np.arange(n_frames) * hop
    idx = starts[:, None] + np.arange(n_fft)[None, :]
    return padded[idx]  # [n_frames, n_fft, ...]


def stft_logpower(
    window: RawEmgWindow | np.ndarray,
    n_fft: int = DEFAULT_N_FFT,
    hop: int = DEFAULT_HOP,
    window_fn: str = "rectangular",
) -> Spectrogram:
    """Causal log-power spectrogram of a raw EMG window.

    Returns one frame per hop (T_frames = ceil(T_samples / hop)); frame t
    only sees samples up to index hop*t + hop - 1. Values are
    log10(|STFT|^2 + 1e-6), so silent input maps to exactly -6.
    """
    samples = window.samples if isinstance(window, RawEmgWindow) else check_emg_window(window)
    if samples.shape[0] == 0:
        raise ValueError("empty signal")
    if hop <= 0:
        raise ValueError("invalid hop")
    if n_fft < hop:
        raise ValueError(f"n_fft ({n_fft}) must be >= hop ({hop})")

    frames = _frame_signal(samples, n_fft, hop)  # [T, n_fft, 2, 16]
    if window_fn == "rectangular":
        pass
    elif window_fn == "hann":
        frames = frames * np.hanning(n_fft)[None, :, None, None]
    else:
        raise ValueError(f"unknown window function {window_fn!r}")

    spectrum = np.fft.rfft(frames, n=n_fft, axis=1)  # [T, n_fft//2+1, 2, 16]
    power = spectrum.real**2 + spectrum.imag**2
    values = np.log10(power + LOG_EPS)
    return Spectrogram(
        values=np.ascontiguousarray(np.moveaxis(values, 1, -1)),
        frame_hop_samples=hop,
        n_fft=n_fft,
    )


def aggregate_rsg(spec: Spectrogram | np.ndarray, band_map: BandMap | None = None) -> Spectrogram:
    """Reduce a full-resolution spectrogram to 6 bands by summing log-powers.

    Each band value is the plain sum of the member bins' log-power values
    (not the log of summed power). The DC bin is discarded. Bins are
    accumulated in ascending order so the result is bit-reproducible.
    """
    if band_map is None:
        band_map = build_band_map()
    if isinstance(spec, Spectrogram):
        values, hop, n_fft = spec.values, spec.frame_hop_samples, spec.n_fft
    else:
        values, hop, n_fft = np.asarray(spec, dtype=np.float64), DEFAULT_HOP, DEFAULT_N_FFT
    values = check_feature_tensor(values, name="spectrogram")
    if values.shape[-1] != band_map.bin_to_band.shape[0]:
        raise ValueError("expected full-resolution spectrogram")

    out = np.zeros(values.shape[:-1] + (band_map.n_bands,), dtype=values.dtype)
    for b, bins in enumerate(band_map.members):
        for f in bins:
            out[..., b] += values[..., f]
    return Spectrogram(values=out, frame_hop_samples=hop, n_fft=n_fft)


def extract_features(
    emg: np.ndarray,
    n_fft: int = DEFAULT_N_FFT,
    hop: int = DEFAULT_HOP,
    reduce_bands: bool = True,
) -> np.ndarray:
    """Convenience wrapper: raw EMG [T, 2, 16] to features [T_frames, 2, 16, F]."""
    spec = stft_logpower(emg, n_fft=n_fft, hop=hop)
    if reduce_bands:
        spec = aggregate_rsg(spec)
    return spec.values


class StreamingSpectrogram:
    """Frame-at-a-time STFT frontend holding the trailing sample context.

    Feeding the same samples in any chunking yields frames bit-identical to
    the batch transform.
    """

    def __init__(self, n_fft: int = DEFAULT_N_FFT, hop: int = DEFAULT_HOP,
                 reduce_bands: bool = True):
        if hop <= 0:
            raise ValueError("invalid hop")
        self.n_fft = n_fft
        self.hop = hop
        self.reduce_bands = reduce_bands
        self._band_map = build_band_map(n_fft) if reduce_bands else None
        self._context = np.zeros((n_fft - hop, N_HANDS, N_CHANNELS))
        self._pending = np.zeros((0, N_HANDS, N_CHANNELS))

    def push(self, samples: np.ndarray) -> np.ndarray:
        """Append raw samples; returns zero or more completed feature frames."""
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim == 2:
            samples = samples[None]
        self._pending = np.concatenate([self._pending, samples], axis=0)
        frames = []
        while self._pending.shape[0] >= self.hop:
            step, self._pending = self._pending[: self.hop], self._pending[self.hop:]
            window = np.concatenate([self._context, step], axis=0)
            self._context = window[self.hop:]
            spectrum = np.fft.rfft(window, n=self.n_fft, axis=0)
            power = spectrum.real**2 + spectrum.imag**2
            frames.append(np.moveaxis(np.log10(power + LOG_EPS), 0, -1))
        if not frames:
            return self._empty_frames()
        out = np.stack(frames)
        if self.reduce_bands:
            out = aggregate_rsg(Spectrogram(out, self.hop, self.n_fft), self._band_map).values
        return out

    def _empty_frames(self) -> np.ndarray:
        n_freqs = N_BANDS if self.reduce_bands else self.n_fft // 2 + 1
        return np.zeros((0, N_HANDS, N_CHANNELS, n_freqs))

    def flush(self) -> np.ndarray:
        """Zero-pad the final partial hop, if any, and emit its frame."""
        n_left = self._pending.shape[0]
        if n_left == 0:
            return self._empty_frames()
        pad = np.zeros((self.hop - n_left, N_HANDS, N_CHANNELS))
        return self.push(pad)
