import numpy as np
import pytest
import torch

import wristkeys as wk
from wristkeys.encoder import PRESETS
from wristkeys_converter import build_reference_model, convert_checkpoint
from wristkeys_converter.reference_model import ReferenceEncoder


def small_config(variant="split_and_share"):
    return wk.ModelConfig(variant=variant, per_hand_width=16, conv_channels=(4, 4),
                          kernel_width=5, vocab_size=7, n_freqs=6)


def test_reference_checkpoint_converts_with_zero_warnings(tmp_path):
    config = small_config()
    model = build_reference_model(config, seed=1)
    src = tmp_path / "ref.pt"
    torch.save(model.state_dict(), src)
    report = convert_checkpoint(src, config, tmp_path / "out.wkc")
    assert report.warnings == []
    assert report.counts["tensors_mapped"] == report.counts["tensors_source"]
    cfg2, weights = wk.load_checkpoint(tmp_path / "out.wkc")
    assert cfg2.variant == "split_and_share"
    weights.validate(cfg2)


def test_lightning_style_prefix_and_wrapper_accepted(tmp_path):
    config = small_config()
    model = build_reference_model(config, seed=2)
    state = {f"model.{k}": v for k, v in model.state_dict().items()}
    src = tmp_path / "ref.pt"
    torch.save({"state_dict": state}, src)
    report = convert_checkpoint(src, config, tmp_path / "out.wkc")
    assert report.warnings == []
    wk.load_checkpoint(tmp_path / "out.wkc")


def test_renamed_tensor_is_named_in_the_failure(tmp_path):
    config = small_config()
    model = build_reference_model(config, seed=3)
    state = dict(model.state_dict())
    state["mlp.shared.0.weight_oops"] = state.pop("mlp.shared.0.weight")
    src = tmp_path / "ref.pt"
    torch.save(state, src)
    with pytest.raises(ValueError, match="weight_oops"):
        convert_checkpoint(src, config, tmp_path / "out.wkc")


def test_extra_tensor_warned_but_conversion_succeeds(tmp_path):
    config = small_config()
    model = build_reference_model(config, seed=4)
    state = dict(model.state_dict())
    state["optimizer.momentum_buffer"] = torch.zeros(3)
    src = tmp_path / "ref.pt"
    torch.save(state, src)
    report = convert_checkpoint(src, config, tmp_path / "out.wkc")
    assert any("optimizer.momentum_buffer" in w for w in report.warnings)
    wk.load_checkpoint(tmp_path / "out.wkc")


def test_shared_variant_with_duplicated_streams_deduplicates(tmp_path):
    config = small_config()
    model = build_reference_model(config, seed=5)
    duplicated = {}
    for name, tensor in model.state_dict().items():
        if ".shared." in name:
            duplicated[name.replace(".shared.", ".left.")] = tensor
            duplicated[name.replace(".shared.", ".right.")] = tensor.clone()
        else:
            duplicated[name] = tensor
    src = tmp_path / "dup.pt"
    torch.save(duplicated, src)
    report = convert_checkpoint(src, config, tmp_path / "out.wkc")
    assert any("deduplicated" in w for w in report.warnings)
    cfg2, weights = wk.load_checkpoint(tmp_path / "out.wkc")

    # the deduplicated checkpoint runs identically to the pristine shared one
    pristine = tmp_path / "ref.pt"
    torch.save(model.state_dict(), pristine)
    convert_checkpoint(pristine, config, tmp_path / "ref.wkc")
    _, ref_weights = wk.load_checkpoint(tmp_path / "ref.wkc")
    x = np.random.default_rng(0).normal(size=(30, 2, 16, 6))
    assert np.array_equal(wk.encode(x, cfg2, weights).logits,
                          wk.encode(x, config, ref_weights).logits)


def test_shared_variant_with_differing_streams_rejected(tmp_path):
    config = small_config()
    model = build_reference_model(config, seed=6)
    duplicated = {}
    for name, tensor in model.state_dict().items():
        if ".shared." in name:
            duplicated[name.replace(".shared.", ".left.")] = tensor
            bad = tensor.clone()
            bad.view(-1)[0] += 1.0
            duplicated[name.replace(".shared.", ".right.")] = bad
        else:
            duplicated[name] = tensor
    src = tmp_path / "bad.pt"
    torch.save(duplicated, src)
    with pytest.raises(ValueError, match="differ byte-wise"):
        convert_checkpoint(src, config, tmp_path / "out.wkc")


def test_shape_conflict_lists_both_shapes(tmp_path):
    config = small_config()
    wrong = ReferenceEncoder(wk.ModelConfig(variant="split_and_share", per_hand_width=32,
                                            conv_channels=(4, 4), kernel_width=5,
                                            vocab_size=7, n_freqs=6))
    src = tmp_path / "wrong.pt"
    torch.save(wrong.state_dict(), src)
    with pytest.raises(ValueError, match=r"shape.*expected"):
        convert_checkpoint(src, config, tmp_path / "out.wkc")


def test_preset_scale_conversion(tmp_path):
    config = PRESETS["splashnet_mini"]
    model = build_reference_model(config, seed=7)
    src = tmp_path / "mini.pt"
    torch.save(model.state_dict(), src)
    report = convert_checkpoint(src, config, tmp_path / "mini.wkc")
    assert report.warnings == []
    cfg2, weights = wk.load_checkpoint(tmp_path / "mini.wkc")
    assert wk.count_params(cfg2) == pytest.approx(1.38e6, rel=0.01)
