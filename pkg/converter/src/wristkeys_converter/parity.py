"""Numerical parity harness: engine forward pass vs. the source framework.

Two comparisons are offered:

- logit parity on random inputs (the converted checkpoint must reproduce
  the torch model's logits within a stated absolute budget), and
- greedy CER parity on a real session (engine greedy decoding vs. torch
  greedy decoding through the same frontend/normalizer), for use when a
  genuine trained checkpoint and recording are available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

import wristkeys as wk
from wristkeys.decode import DEFAULT_CHARSET
from wristkeys.encoder import ModelConfig, WeightStore

from .reference_model import ReferenceEncoder


@dataclass(frozen=True)
class LogitParity:
    max_abs_diff: float
    n_inputs: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_abs_diff <= self.tolerance


def logit_parity(
    torch_model: ReferenceEncoder,
    config: ModelConfig,
    weights: WeightStore,
    n_inputs: int = 10,
    n_frames: int = 150,
    tolerance: float = 1e-4,
    seed: int = 0,
) -> LogitParity:
    """Compare engine logits against the torch forward on random inputs."""
    rng = np.random.default_rng(seed)
    model = torch_model.double()
    worst = 0.0
    with torch.no_grad():
        for _ in range(n_inputs):
            x = rng.normal(size=(n_frames, 2, 16, config.n_freqs))
            engine = wk.encode(x, config, weights).logits
            reference = model(torch.from_numpy(x)).numpy()
            worst = max(worst, float(np.max(np.abs(engine - reference))))
    return LogitParity(max_abs_diff=worst, n_inputs=n_inputs, tolerance=tolerance)


def greedy_cer_parity(
    session: wk.SessionRecord,
    config: ModelConfig,
    weights: WeightStore,
    torch_model: ReferenceEncoder,
    blank_index: int | None = None,
    symbols=DEFAULT_CHARSET,
) -> dict:
    """Greedy CER of the engine vs. the torch reference on one session."""
    blank = config.vocab_size - 1 if blank_index is None else blank_index
    engine_logits = wk.compute_logits(session, config, weights)
    features = wk.extract_features(
        session.emg.astype(np.float64), reduce_bands=config.n_freqs == 6
    )
    normalized = wk.rtn_batch(features)
    with torch.no_grad():
        torch_logits = torch_model.double()(torch.from_numpy(normalized)).numpy()

    reference = session.reference_keystrokes
    engine_text = wk.greedy_decode(engine_logits, blank, symbols)
    torch_text = wk.greedy_decode(torch_logits, blank, symbols)
    engine_cer = wk.cer(reference, engine_text).cer
    torch_cer = wk.cer(reference, torch_text).cer
    return {
        "engine_cer": engine_cer,
        "reference_cer": torch_cer,
        "abs_difference_pp": abs(engine_cer - torch_cer),
        "engine_text": engine_text,
        "reference_text": torch_text,
    }
