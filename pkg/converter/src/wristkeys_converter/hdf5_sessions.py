"""Convert HDF5 wrist-EMG recordings into the engine's portable session format.

Expected source layout (emg2qwerty-style):

    /emg2qwerty/timeseries   compound dataset with fields
        time       float64 seconds (monotone, ~2 kHz)
        emg_left   float32[16]
        emg_right  float32[16]
    attrs["metadata"]        JSON: user, session, and keystrokes as a list of
                             {"key": <name>, "timestamp": <seconds>}

Key names may be single characters or named keys (Key.space, Key.backspace,
Key.enter, Key.tab); anything unmappable is dropped with a warning so every
discarded annotation is visible in the report.
"""

from __future__ import annotations

import json

import h5py
import numpy as np

from wristkeys.io import SessionRecord, write_session
from wristkeys.validation import N_CHANNELS, SAMPLE_RATE_HZ

from .report import ConversionReport, sha256_of

GROUP = "emg2qwerty"
DATASET = "timeseries"

NAMED_KEYS = {
    "Key.space": " ",
    "Key.backspace": "\b",
    "Key.enter": "\n",
    "Key.tab": "\t",
    "Key.delete": "\x7f",
}


def _map_key(name: str) -> str | None:
    if len(name) == 1:
        return name
    return NAMED_KEYS.get(name)


def convert_session(
    h5_path,
    out_path,
    split: str = "train",
    splits_manifest: dict[str, str] | None = None,
) -> ConversionReport:
    """Write a portable session file; the split tag comes from the manifest
    (session id -> split) when one is given, otherwise from `split`."""
    report = ConversionReport(source_path=str(h5_path), output_path=str(out_path))
    with h5py.File(h5_path, "r") as fh:
        if GROUP not in fh:
            raise ValueError(f"missing group '/{GROUP}'")
        group = fh[GROUP]
        if DATASET not in group:
            raise ValueError(f"missing dataset '/{GROUP}/{DATASET}'")
        table = group[DATASET][()]
        for fieldname in ("time", "emg_left", "emg_right"):
            if fieldname not in (table.dtype.names or ()):
                raise ValueError(f"missing field '/{GROUP}/{DATASET}.{fieldname}'")
        raw_meta = group.attrs.get("metadata")
        if raw_meta is None:
            raise ValueError(f"missing attribute '/{GROUP}@metadata'")
        metadata = json.loads(raw_meta)

    left = np.asarray(table["emg_left"], dtype=np.float32)
    right = np.asarray(table["emg_right"], dtype=np.float32)
    for name, arr in (("emg_left", left), ("emg_right", right)):
        if arr.ndim != 2 or arr.shape[1] != N_CHANNELS:
            raise ValueError(
                f"'/{GROUP}/{DATASET}.{name}': expected {N_CHANNELS} channels, got shape {arr.shape}"
            )

    times = np.asarray(table["time"], dtype=np.float64)
    if times.shape[0] < 2:
        raise ValueError(f"'/{GROUP}/{DATASET}.time': need at least two samples")
    dt = np.median(np.diff(times))
    rate = 1.0 / dt
    if abs(rate - SAMPLE_RATE_HZ) > 1.0:
        raise ValueError(f"unsupported sample rate {rate:.1f} Hz (expected {SAMPLE_RATE_HZ})")

    emg = np.stack([left, right], axis=1)  # [T, 2, 16]
    t_samples = emg.shape[0]

    labels: list[tuple[int, str]] = []
    previous = -1
    for entry in metadata.get("keystrokes", []):
        symbol = _map_key(str(entry["key"]))
        if symbol is None:
            report.warn(f"dropped keystroke {entry['key']!r} at {entry['timestamp']:.3f}s (no mapping)")
            continue
        sample = int(round((float(entry["timestamp"]) - times[0]) * SAMPLE_RATE_HZ))
        if not 0 <= sample < t_samples:
            report.warn(f"dropped keystroke {entry['key']!r}: timestamp outside the recording")
            continue
        if sample <= previous:
            sample = previous + 1
            report.warn(f"bumped keystroke {entry['key']!r} by {sample - previous} sample(s) to keep order")
            if sample >= t_samples:
                report.warn(f"dropped keystroke {entry['key']!r}: bumped past the recording end")
                continue
        labels.append((sample, symbol))
        previous = sample

    session_id = str(metadata.get("session", "unknown"))
    if splits_manifest is not None:
        if session_id not in splits_manifest:
            raise ValueError(f"session {session_id!r} missing from the splits manifest")
        split = splits_manifest[session_id]

    record = SessionRecord(
        participant_id=str(metadata.get("user", "unknown")),
        session_id=session_id,
        split=split,
        emg=emg,
        labels=tuple(labels),
    )
    write_session(record, out_path)
    report.counts = {
        "samples": t_samples,
        "labels_written": len(labels),
        "labels_source": len(metadata.get("keystrokes", [])),
    }
    report.checksum = sha256_of(out_path)
    return report
