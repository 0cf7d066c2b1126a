"""Training-time input transforms: channel masking, electrode rotation, alignment jitter.

The channel-masking sampler follows a two-level law: a per-batch coin decides
whether the batch is masked at all and how many masks each electrode gets;
the width and start of every mask are then drawn independently per electrode
and per sample. Widths are drawn from {0..f_max-1} and clamped to the band
count B, so a single mask erases an entire electrode with probability
(f_max - B) / f_max.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frontend import BandMap, build_band_map
from .validation import N_CHANNELS, SAMPLE_RATE_HZ

MaskValue = ("zero", "per_sample_feature_mean")
MaskStage = ("post_rsg", "pre_aggregation")


@dataclass(frozen=True)
class AcmConfig:
    apply_probability: float = 2.0 / 3.0
    n_masks_support: tuple[int, ...] = (0, 1, 2)
    f_max: int = 12
    num_bands: int = 6
    mask_value: str = "zero"
    stage: str = "post_rsg"

    def __post_init__(self):
        if self.f_max < 1:
            raise ValueError("f_max must be >= 1")
        if not 0.0 <= self.apply_probability <= 1.0:
            raise ValueError("apply_probability must lie in [0, 1]")
        if self.num_bands < 1:
            raise ValueError("num_bands must be >= 1")
        if self.mask_value not in MaskValue:
            raise ValueError(f"mask_value must be one of {MaskValue}")
        if self.stage not in MaskStage:
            raise ValueError(f"stage must be one of {MaskStage}")


# Frequency-mask settings of the milder augmentation recipe this work replaced
# (kept for side-by-side comparisons only; not a tested target).
MILD_FREQ_MASK_PRESET = AcmConfig(apply_probability=1.0, n_masks_support=(2,), f_max=4)


@dataclass(frozen=True)
class MaskRealization:
    """Sampled masks for one mini-batch: arrays [n_samples, n_electrodes, n_masks]."""

    applied: bool
    n_masks: int
    starts: np.ndarray
    widths: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.starts.shape[0]

    @property
    def n_electrodes(self) -> int:
        return self.starts.shape[1]


@dataclass(frozen=True)
class JitterConfig:
    max_offset_ms: float = 60.0

    def __post_init__(self):
        if self.max_offset_ms < 0:
            raise ValueError("max_offset_ms must be >= 0")


def _batch_rng(rng_seed: int, batch_index: int) -> np.random.Generator:
    # One stream per (seed, batch): realizations are a pure function of these,
    # independent of processing order.
    return np.random.default_rng([int(rng_seed), int(batch_index)])


def acm_sample_masks(
    config: AcmConfig,
    n_electrodes: int,
    rng_seed: int,
    n_samples: int = 1,
    batch_index: int = 0,
    force_apply: bool | None = None,
    force_n_masks: int | None = None,
) -> MaskRealization:
    """Draw a mask realization for a mini-batch.

    The apply coin (probability `apply_probability`) and the number of masks
    per electrode are batch-level draws; each mask's (width, start) pair is
    drawn independently for every electrode and sample. `force_apply` and
    `force_n_masks` bypass the batch-level draws for diagnostics.
    """
    rng = _batch_rng(rng_seed, batch_index)
    applied = rng.uniform() < config.apply_probability
    n_masks = int(rng.choice(np.asarray(config.n_masks_support)))
    if force_apply is not None:
        applied = force_apply
    if force_n_masks is not None:
        n_masks = int(force_n_masks)

    if not applied:
        n_masks = 0
    shape = (n_samples, n_electrodes, n_masks)
    if n_masks == 0:
        empty = np.zeros(shape, dtype=np.int64)
        return MaskRealization(applied=applied, n_masks=n_masks, starts=empty, widths=empty)

    b = config.num_bands
    widths = np.minimum(rng.integers(0, config.f_max, size=shape), b)
    starts = rng.integers(0, b - widths + 1)
    return MaskRealization(applied=applied, n_masks=n_masks, starts=starts, widths=widths)


def _band_mask_matrix(realization: MaskRealization, n_bands: int) -> np.ndarray:
    """Boolean [n_samples, n_electrodes, n_bands]: True where a band is masked."""
    band_idx = np.arange(n_bands)
    covered = (band_idx >= realization.starts[..., None]) & (
        band_idx < (realization.starts + realization.widths)[..., None]
    )
    return covered.any(axis=2)


def acm_apply(tensor: np.ndarray, masks: MaskRealization, config: AcmConfig,
              band_map: BandMap | None = None) -> np.ndarray:
    """Apply a mask realization to feature tensors.

    Accepts a single sample [T, 2, 16, F] (realization must have n_samples=1)
    or a batch [S, T, 2, 16, F]. Electrodes are indexed hand-major:
    e = hand * 16 + channel. Masked cells become 0, or the feature's temporal
    mean within the sample under mean imputation. In the pre-aggregation
    stage the 6-band masks are expanded onto the 33-bin axis through the
    band map (the DC bin is never masked).
    """
    arr = np.asarray(tensor, dtype=np.float64)
    single = arr.ndim == 4
    if single:
        arr = arr[None]
    if arr.ndim != 5:
        raise ValueError(f"expected [T,2,16,F] or [S,T,2,16,F], got shape {np.shape(tensor)}")
    s, t, n_hands, n_ch, f = arr.shape
    if s != masks.n_samples:
        raise ValueError(f"realization covers {masks.n_samples} samples, tensor has {s}")
    if n_hands * n_ch != masks.n_electrodes:
        raise ValueError(f"realization covers {masks.n_electrodes} electrodes, tensor has {n_hands * n_ch}")
    if masks.n_masks and (masks.starts.min() < 0 or (masks.starts + masks.widths).max() > config.num_bands):
        raise ValueError("mask indices out of range")

    expected_f = config.num_bands if config.stage == "post_rsg" else None
    if config.stage == "post_rsg":
        if f != expected_f:
            raise ValueError(f"post_rsg masking expects F={config.num_bands}, got F={f}")
        masked_bands = _band_mask_matrix(masks, config.num_bands)
        cell_mask = masked_bands  # [S, E, F]
    else:
        if band_map is None:
            band_map = build_band_map()
        if f != band_map.bin_to_band.shape[0]:
            raise ValueError(f"pre_aggregation masking expects F={band_map.bin_to_band.shape[0]}, got F={f}")
        masked_bands = _band_mask_matrix(masks, config.num_bands)
        # expand dummy-band mask onto member bins; DC (band -1) stays unmasked
        expand = np.zeros((config.num_bands + 1, f), dtype=bool)
        for b, bins in enumerate(band_map.members):
            expand[b, list(bins)] = True
        cell_mask = masked_bands @ expand[: config.num_bands]  # bool matmul -> [S, E, F]
        cell_mask = cell_mask.astype(bool)

    cell_mask = cell_mask.reshape(s, n_hands, n_ch, f)[:, None]  # [S, 1, 2, 16, F]
    out = arr.copy()
    if config.mask_value == "zero":
        fill = np.zeros((s, 1, n_hands, n_ch, f))
    else:
        fill = arr.mean(axis=1, keepdims=True)  # per-sample temporal mean per feature
    out = np.where(cell_mask, fill, out)
    return out[0] if single else out


def rotation_augment(x: np.ndarray, offset: int | None, rng_seed: int | None = None) -> np.ndarray:
    """Cyclically roll the 16-electrode axis by one position (or not at all).

    offset=None draws -1 or +1 from the seeded generator. The same offset is
    applied to both hand bands and all timesteps.
    """
    if offset is None:
        rng = np.random.default_rng(rng_seed)
        offset = int(rng.choice([-1, 1]))
    if offset not in (-1, 0, 1):
        raise ValueError(f"rotation offset must be -1, 0, or +1, got {offset}")
    arr = np.asarray(x)
    if arr.ndim < 3 or arr.shape[2] != N_CHANNELS:
        raise ValueError(f"expected channel axis of length {N_CHANNELS} at position 2, got shape {arr.shape}")
    if offset == 0:
        return arr.copy()
    return np.roll(arr, offset, axis=2)


def temporal_jitter(window: np.ndarray, config: JitterConfig, rng_seed: int,
                    sample_rate_hz: int = SAMPLE_RATE_HZ) -> np.ndarray:
    """Shift each hand band independently by a random integer sample offset.

    Offsets are uniform on [-max_offset, +max_offset] samples; positive
    offsets delay the band. Out-of-range regions are zero-filled and the
    output length is unchanged.
    """
    arr = np.asarray(window, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[1] != 2:
        raise ValueError(f"expected [T, 2, 16] raw window, got shape {arr.shape}")
    t = arr.shape[0]
    max_off = int(round(config.max_offset_ms * sample_rate_hz / 1000.0))
    if max_off > t:
        raise ValueError(f"max offset {max_off} samples exceeds window length {t}")
    if max_off == 0:
        return arr.copy()
    rng = np.random.default_rng(rng_seed)
    offsets = rng.integers(-max_off, max_off + 1, size=2)
    out = np.zeros_like(arr)
    for hand, off in enumerate(offsets):
        off = int(off)
        if off >= 0:
            out[off:t, hand] = arr[: t - off, hand]
        else:
            out[: t + off, hand] = arr[-off:, hand]
    return out


def jitter_offsets(config: JitterConfig, rng_seed: int, n_draws: int = 1,
                   sample_rate_hz: int = SAMPLE_RATE_HZ) -> np.ndarray:
    """Sample the per-hand offset distribution (diagnostic for uniformity checks)."""
    max_off = int(round(config.max_offset_ms * sample_rate_hz / 1000.0))
    rng = np.random.default_rng(rng_seed)
    return rng.integers(-max_off, max_off + 1, size=(n_draws, 2))


def acm_monte_carlo(
    config: AcmConfig,
    n_draws: int,
    rng_seed: int,
    force_n_masks: int | None = None,
    samples_per_batch: int | None = None,
    n_electrodes: int = 32,
) -> dict:
    """Monte-Carlo mask statistics over `n_draws` electrode draws.

    Reports, per electrode:
      - frac_full_width_any: >=1 individual mask clamped to full width B
        (the quantity behind the 0.5 / 0.75 single/double-mask figures);
      - frac_union_all_bands: the union of masks covers every band (the
        operationally erased fraction; slightly higher for 2 masks because
        two partial masks can tile the whole axis);
      - masked_fraction: mean fraction of bands masked.
    With force_n_masks=None the full batch law runs (apply coin plus the
    number-of-masks draw) and the masked fraction is reported both over all
    batches and conditioned on masked batches.
    """
    if samples_per_batch is None:
        # forced draws bypass the batch-level law, so batches can be large and
        # vectorized; the full law needs many batches for the gate and the
        # number-of-masks draw to mix
        samples_per_batch = 4096 if force_n_masks is not None else 1
    b = config.num_bands
    totals = {"electrodes": 0, "full_width": 0, "union_all": 0, "masked_cells": 0}
    masked_batch_cells = 0
    masked_batch_electrodes = 0
    n_batches_masked = 0
    n_batches = 0
    batch_index = 0
    drawn = 0
    while drawn < n_draws:
        n_samples = min(samples_per_batch, -(-(n_draws - drawn) // n_electrodes))
        real = acm_sample_masks(
            config, n_electrodes, rng_seed, n_samples=n_samples,
            batch_index=batch_index, force_n_masks=force_n_masks,
            force_apply=True if force_n_masks is not None else None,
        )
        n_batches += 1
        batch_index += 1
        n_elec = n_samples * n_electrodes
        drawn += n_elec
        totals["electrodes"] += n_elec
        if real.n_masks:
            full = (real.widths == b).any(axis=2)
            band_mask = _band_mask_matrix(real, b)
            union_all = band_mask.all(axis=2)
            cells = int(band_mask.sum())
            totals["full_width"] += int(full.sum())
            totals["union_all"] += int(union_all.sum())
            totals["masked_cells"] += cells
        else:
            cells = 0
        if real.applied:
            n_batches_masked += 1
            masked_batch_cells += cells
            masked_batch_electrodes += n_elec
    n = totals["electrodes"]
    report = {
        "draws": n,
        "frac_full_width_any": totals["full_width"] / n,
        "frac_union_all_bands": totals["union_all"] / n,
        "masked_fraction": totals["masked_cells"] / (n * b),
        "n_batches": n_batches,
    }
    if force_n_masks is None:
        report["masked_fraction_all_batches"] = report.pop("masked_fraction")
        report["masked_fraction_masked_batches"] = (
            masked_batch_cells / (masked_batch_electrodes * b) if masked_batch_electrodes else 0.0
        )
        report["frac_batches_masked"] = n_batches_masked / n_batches
    return report
