"""Convert PyTorch state dicts into the engine's portable checkpoint format.

The torch-name to engine-name mapping is a checked-in data table
(name_map.json), not code, so reference naming drift stays a reviewable
one-line change. Unmapped tensors are reported, never silently dropped.
"""

from __future__ import annotations

import json
import re
from importlib import resources

import numpy as np
import torch

from wristkeys.encoder import ModelConfig, WeightStore
from wristkeys.io import save_checkpoint

from .report import ConversionReport, sha256_of


def load_name_map(path=None) -> list[dict]:
    if path is None:
        data = resources.files("wristkeys_converter").joinpath("name_map.json").read_text()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            data = fh.read()
    return json.loads(data)["rules"]


def _apply_transform(arr: np.ndarray, transform: str, name: str) -> np.ndarray:
    if transform == "copy":
        return arr
    if transform == "transpose2d":
        if arr.ndim != 2:
            raise ValueError(f"{name}: transpose2d expects a matrix, got shape {arr.shape}")
        return arr.T
    if transform == "conv_time_reversed":
        if arr.ndim != 4 or arr.shape[2] != 1:
            raise ValueError(f"{name}: expected conv kernel [K,K,1,w], got shape {arr.shape}")
        return arr[:, :, 0, ::-1]
    raise ValueError(f"unknown transform {transform!r} for {name}")


def _load_state_dict(ckpt_path) -> dict[str, torch.Tensor]:
    payload = torch.load(ckpt_path, map_location="cpu", weights_only=True)
    if isinstance(payload, dict) and "state_dict" in payload:
        payload = payload["state_dict"]
    if not isinstance(payload, dict):
        raise ValueError("checkpoint does not contain a state dict")
    return payload


def _dedup_for_sharing(tensors: dict[str, np.ndarray], report: ConversionReport) -> dict[str, np.ndarray]:
    out = dict(tensors)
    for left_name in [n for n in tensors if ".left." in n]:
        right_name = left_name.replace(".left.", ".right.")
        shared_name = left_name.replace(".left.", ".shared.")
        if right_name not in tensors:
            raise ValueError(f"{left_name!r} present without its {right_name!r} twin")
        if out[left_name].tobytes() != out[right_name].tobytes():
            raise ValueError(
                f"cannot share {left_name!r}: left/right tensors differ byte-wise"
            )
        out[shared_name] = out.pop(left_name)
        out.pop(right_name)
        report.warn(f"deduplicated {left_name!r} + {right_name!r} -> {shared_name!r}")
    return out


def convert_checkpoint(
    ckpt_path,
    config: ModelConfig,
    out_path,
    name_map_path=None,
) -> ConversionReport:
    report = ConversionReport(source_path=str(ckpt_path), output_path=str(out_path))
    rules = [(re.compile(r["source"]), r["target"], r["transform"]) for r in load_name_map(name_map_path)]
    state = _load_state_dict(ckpt_path)

    tensors: dict[str, np.ndarray] = {}
    mapped = 0
    for source_name, tensor in state.items():
        arr = tensor.detach().cpu().numpy().astype(np.float32)
        for pattern, target, transform in rules:
            match = pattern.match(source_name)
            if match:
                engine_name = target
                for i, group in enumerate(match.groups()):
                    engine_name = engine_name.replace("{" + str(i) + "}", group)
                tensors[engine_name] = np.ascontiguousarray(
                    _apply_transform(arr, transform, source_name)
                )
                mapped += 1
                break
        else:
            report.warn(f"unmapped tensor {source_name!r} (shape {tuple(arr.shape)})")

    if config.shares_weights and any(".left." in n for n in tensors):
        tensors = _dedup_for_sharing(tensors, report)

    weights = WeightStore(tensors)
    try:
        weights.validate(config)
    except ValueError as exc:
        detail = f"converted tensors do not satisfy the target config: {exc}"
        if report.warnings:
            detail += "; " + "; ".join(report.warnings)
        raise ValueError(detail) from exc
    save_checkpoint(config, weights, out_path)
    report.counts = {
        "tensors_source": len(state),
        "tensors_mapped": mapped,
        "tensors_written": len(tensors),
    }
    report.checksum = sha256_of(out_path)
    return report
