"""Numerical parity acceptance: converted checkpoints must reproduce the
source framework's forward pass."""

import os

import pytest
import torch

import wristkeys as wk
from wristkeys.encoder import PRESETS
from wristkeys_converter import build_reference_model, convert_checkpoint
from wristkeys_converter.parity import greedy_cer_parity, logit_parity


@pytest.fixture(scope="module")
def converted_mini(tmp_path_factory):
    config = PRESETS["splashnet_mini"]
    model = build_reference_model(config, seed=0)
    tmp = tmp_path_factory.mktemp("parity")
    torch.save(model.state_dict(), tmp / "ref.pt")
    convert_checkpoint(tmp / "ref.pt", config, tmp / "ref.wkc")
    _, weights = wk.load_checkpoint(tmp / "ref.wkc")
    return config, weights, model


def test_logit_parity_on_ten_random_inputs(converted_mini):
    config, weights, model = converted_mini
    result = logit_parity(model, config, weights, n_inputs=10, tolerance=1e-4)
    print(f"[{'PASS' if result.passed else 'FAIL'}] checkpoint logit parity "
          f"(max |diff| = {result.max_abs_diff:.2e} <= 1e-4 on {result.n_inputs} inputs)")
    assert result.passed


def test_greedy_cer_parity_on_synthetic_session(converted_mini):
    config, weights, model = converted_mini
    session = wk.simulate_session(wk.SimulatorSpec(duration_s=3.0), 13)
    result = greedy_cer_parity(session, config, weights, model)
    assert result["abs_difference_pp"] <= 0.1


@pytest.mark.skipif(
    "WRISTKEYS_REFERENCE_CKPT" not in os.environ or "WRISTKEYS_REFERENCE_SESSION" not in os.environ,
    reason="set WRISTKEYS_REFERENCE_CKPT and WRISTKEYS_REFERENCE_SESSION to run "
           "the published-checkpoint parity check",
)
def test_greedy_cer_parity_on_published_checkpoint(tmp_path):
    config = PRESETS["splashnet"]
    ckpt = os.environ["WRISTKEYS_REFERENCE_CKPT"]
    convert_checkpoint(ckpt, config, tmp_path / "published.wkc")
    _, weights = wk.load_checkpoint(tmp_path / "published.wkc")
    model = build_reference_model(config)
    state = torch.load(ckpt, map_location="cpu", weights_only=True)
    if isinstance(state, dict) and "state_dict" in state:
        state = {k.removeprefix("model."): v for k, v in state["state_dict"].items()}
    model.load_state_dict(state)
    session = wk.read_session(os.environ["WRISTKEYS_REFERENCE_SESSION"])
    result = greedy_cer_parity(session, config, weights, model)
    assert result["abs_difference_pp"] <= 0.1
