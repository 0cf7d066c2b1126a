"""Portable on-disk formats and the synthetic session generator.

Both file formats share one layout: a human-readable magic line naming the
format and version, one line of canonical JSON (sorted keys, no whitespace),
then a little-endian float32 binary payload. Canonical JSON plus raw float32
bytes make the round trip byte-exact and the files trivial to parse from any
language.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .encoder import ModelConfig, WeightStore
from .validation import N_CHANNELS, N_HANDS, SAMPLE_RATE_HZ

SESSION_MAGIC = "wristkeys-session v1"
CHECKPOINT_MAGIC = "wristkeys-checkpoint v1"
SPLITS = ("train", "train_domain_val", "other_domain_val", "test_domain_val", "test_domain_test")


class NumericError(RuntimeError):
    """Non-finite values produced or encountered during computation."""


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


@dataclass(frozen=True)
class SessionRecord:
    participant_id: str
    session_id: str
    split: str
    emg: np.ndarray  # float32 [T, 2, 16]
    labels: tuple[tuple[int, str], ...]  # (timestamp in samples, key symbol)
    sample_rate_hz: int = SAMPLE_RATE_HZ

    def __post_init__(self):
        object.__setattr__(self, "emg", np.ascontiguousarray(self.emg, dtype=np.float32))
        object.__setattr__(self, "labels", tuple((int(t), str(s)) for t, s in self.labels))
        _validate_session_fields(self.split, self.sample_rate_hz, self.emg, self.labels)

    @property
    def n_samples(self) -> int:
        return self.emg.shape[0]

    @property
    def reference_keystrokes(self) -> str:
        return "".join(sym for _, sym in self.labels)


def _validate_session_fields(split, rate, emg, labels) -> None:
    if split not in SPLITS:
        raise ValueError(f"unknown split tag {split!r}, expected one of {SPLITS}")
    if rate != SAMPLE_RATE_HZ:
        raise ValueError(f"unsupported sample rate {rate}")
    if emg.ndim != 3 or emg.shape[1] != N_HANDS or emg.shape[2] != N_CHANNELS:
        raise ValueError(f"EMG payload must be [T, {N_HANDS}, {N_CHANNELS}], got {emg.shape}")
    previous = -1
    for ts, _ in labels:
        if ts <= previous:
            raise ValueError("label timestamps must be strictly increasing")
        if ts >= emg.shape[0]:
            raise ValueError(f"label timestamp {ts} beyond the last sample {emg.shape[0] - 1}")
        previous = ts


def write_session(record: SessionRecord, path) -> None:
    header = {
        "labels": [[t, s] for t, s in record.labels],
        "num_samples": record.n_samples,
        "participant_id": record.participant_id,
        "sample_rate_hz": record.sample_rate_hz,
        "session_id": record.session_id,
        "split": record.split,
    }
    with open(path, "wb") as fh:
        fh.write((SESSION_MAGIC + "\n").encode("ascii"))
        fh.write((_canonical_json(header) + "\n").encode("ascii"))
        fh.write(record.emg.astype("<f4").tobytes())


def read_session(path) -> SessionRecord:
    with open(path, "rb") as fh:
        magic = fh.readline().decode("ascii", errors="replace").rstrip("\n")
        if magic != SESSION_MAGIC:
            raise ValueError(f"bad magic/version line {magic!r}, expected {SESSION_MAGIC!r}")
        try:
            header = json.loads(fh.readline().decode("ascii"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"malformed session header: {exc}") from None
        payload = fh.read()
    t = int(header["num_samples"])
    expected = t * N_HANDS * N_CHANNELS * 4
    if len(payload) != expected:
        raise ValueError(f"truncated payload: expected {expected} bytes, got {len(payload)}")
    emg = np.frombuffer(payload, dtype="<f4").reshape(t, N_HANDS, N_CHANNELS)
    return SessionRecord(
        participant_id=str(header["participant_id"]),
        session_id=str(header["session_id"]),
        split=str(header["split"]),
        emg=emg,
        labels=tuple((int(ts), str(sym)) for ts, sym in header["labels"]),
        sample_rate_hz=int(header["sample_rate_hz"]),
    )


def save_checkpoint(config: ModelConfig, weights: WeightStore, path) -> None:
    weights.validate(config)
    names = weights.names
    tensors = {}
    offset = 0
    for name in names:
        arr = np.ascontiguousarray(weights[name], dtype="<f4")
        tensors[name] = {"dtype": "float32", "offset": offset, "shape": list(arr.shape)}
        offset += arr.nbytes
    manifest = {"config": config.to_dict(), "tensors": tensors}
    with open(path, "wb") as fh:
        fh.write((CHECKPOINT_MAGIC + "\n").encode("ascii"))
        fh.write((_canonical_json(manifest) + "\n").encode("ascii"))
        for name in names:
            fh.write(np.ascontiguousarray(weights[name], dtype="<f4").tobytes())


def _dedup_shared_streams(config: ModelConfig, tensors: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Collapse left/right encoder tensors into shared ones for sharing variants."""
    out = dict(tensors)
    left_names = [n for n in tensors if ".left." in n]
    for left_name in left_names:
        right_name = left_name.replace(".left.", ".right.")
        shared_name = left_name.replace(".left.", ".shared.")
        if right_name not in tensors:
            raise ValueError(f"sharing violated: {left_name!r} present without {right_name!r}")
        if tensors[left_name].tobytes() != tensors[right_name].tobytes():
            raise ValueError(
                f"sharing violated: {left_name!r} and {right_name!r} differ for a weight-shared variant"
            )
        out[shared_name] = out.pop(left_name)
        out.pop(right_name)
    return out


def load_checkpoint(path) -> tuple[ModelConfig, WeightStore]:
    with open(path, "rb") as fh:
        magic = fh.readline().decode("ascii", errors="replace").rstrip("\n")
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"bad magic/version line {magic!r}, expected {CHECKPOINT_MAGIC!r}")
        try:
            manifest = json.loads(fh.readline().decode("ascii"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"malformed checkpoint manifest: {exc}") from None
        payload = fh.read()

    config = ModelConfig.from_dict(manifest["config"])
    tensors = {}
    for name, meta in manifest["tensors"].items():
        if meta.get("dtype", "float32") != "float32":
            raise ValueError(f"tensor {name!r} has unsupported dtype {meta.get('dtype')!r}")
        shape = tuple(int(s) for s in meta["shape"])
        nbytes = int(np.prod(shape)) * 4
        offset = int(meta["offset"])
        if offset + nbytes > len(payload):
            raise ValueError(
                f"tensor {name!r} extends past the payload "
                f"(offset {offset} + {nbytes} bytes > {len(payload)})"
            )
        arr = np.frombuffer(payload, dtype="<f4", count=int(np.prod(shape)), offset=offset)
        if np.isnan(arr).any():
            raise ValueError(f"tensor {name!r} contains NaN values")
        tensors[name] = arr.reshape(shape).copy()

    if config.shares_weights:
        tensors = _dedup_shared_streams(config, tensors)
    weights = WeightStore(tensors)
    weights.validate(config)
    return config, weights


# --- synthetic sessions ---------------------------------------------------

# Rough left/right key split of a standard layout; anything else falls back
# to character-code parity.
_LEFT_KEYS = set("qwertasdfgzxcvbQWERTASDFGZXCVB12345")
_RIGHT_KEYS = set("yuiophjklnmYUIOPHJKLNM67890 .,;'\n\b\t")

DEFAULT_SIM_KEYS = ("e", "t", "a", "o", "i", "n", "s", "h", " ", "\b")


@dataclass(frozen=True)
class SimulatorSpec:
    duration_s: float = 4.0
    keys: tuple[str, ...] = DEFAULT_SIM_KEYS
    keys_per_second: float = 2.0
    noise_std: float = 0.05
    burst_amplitude: float = 1.0
    participant_id: str = "sim-000"
    session_id: str = "sim-000-a"
    split: str = "test_domain_test"

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be > 0")
        if self.keys_per_second <= 0:
            raise ValueError("keys_per_second must be > 0")


def _key_template(symbol: str) -> tuple[int, list[int], list[float], float]:
    """Deterministic (hand, channels, amplitudes, carrier Hz) for a key symbol."""
    code = sum(ord(c) * (31**i) for i, c in enumerate(symbol))
    if symbol in _LEFT_KEYS:
        hand = 0
    elif symbol in _RIGHT_KEYS:
        hand = 1
    else:
        hand = code % 2
    channels = [(code + j * 5) % N_CHANNELS for j in range(3)]
    amplitudes = [1.0, 0.6, 0.35]
    carrier_hz = 31.25 * (3 + code % 27)  # bin-aligned, within 93.75..906.25 Hz
    return hand, channels, amplitudes, carrier_hz


def simulate_session(spec: SimulatorSpec, rng_seed: int) -> SessionRecord:
    """Label-consistent synthetic EMG: per-key bursts on hand-specific channels.

    Each key symbol maps to a fixed hand, channel subset, and carrier
    frequency; a keystroke adds a Gaussian-windowed tone burst over its
    channels on top of white noise. Keys are decodable in principle because
    their signatures are distinct and confined to one hand.
    """
    rng = np.random.default_rng(rng_seed)
    t_samples = int(round(spec.duration_s * SAMPLE_RATE_HZ))
    emg = rng.normal(0.0, spec.noise_std, size=(t_samples, N_HANDS, N_CHANNELS))

    labels = []
    mean_gap = SAMPLE_RATE_HZ / spec.keys_per_second
    cursor = int(0.4 * SAMPLE_RATE_HZ)
    burst_sigma = 0.020 * SAMPLE_RATE_HZ  # 20 ms envelope
    half_width = int(4 * burst_sigma)
    while cursor < t_samples - half_width - 1:
        symbol = str(rng.choice(spec.keys))
        hand, channels, amps, carrier = _key_template(symbol)
        n = np.arange(cursor - half_width, cursor + half_width + 1)
        envelope = np.exp(-0.5 * ((n - cursor) / burst_sigma) ** 2)
        tone = np.sin(2 * np.pi * carrier * n / SAMPLE_RATE_HZ)
        burst = spec.burst_amplitude * envelope * tone
        for ch, amp in zip(channels, amps):
            emg[n[0] : n[-1] + 1, hand, ch] += amp * burst
        labels.append((cursor, symbol))
        cursor += int(mean_gap * rng.uniform(0.75, 1.3))

    return SessionRecord(
        participant_id=spec.participant_id,
        session_id=spec.session_id,
        split=spec.split,
        emg=emg.astype(np.float32),
        labels=tuple(labels),
    )
