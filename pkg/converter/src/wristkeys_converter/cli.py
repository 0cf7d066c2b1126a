"""Converter command line: convert-session, convert-checkpoint, parity."""

from __future__ import annotations

import argparse
import json
import sys
import tempfile

import torch

from wristkeys.encoder import PRESETS, ModelConfig
from wristkeys.io import load_checkpoint

from .checkpoints import convert_checkpoint
from .hdf5_sessions import convert_session
from .parity import logit_parity
from .reference_model import build_reference_model


def _config_from_args(args) -> ModelConfig:
    if args.preset:
        return PRESETS[args.preset]
    if args.model_config:
        with open(args.model_config, "r", encoding="utf-8") as fh:
            return ModelConfig.from_dict(json.load(fh))
    raise ValueError("need --preset or --model-config")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wristkeys-convert", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert-session", help="HDF5 recording -> portable session file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--splits-manifest", help="JSON file mapping session id -> split tag")

    p = sub.add_parser("convert-checkpoint", help="torch state dict -> portable checkpoint")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--model-config", help="JSON model configuration")
    p.add_argument("--name-map", help="override the checked-in tensor name map")

    p = sub.add_parser("parity", help="logit parity of a converted checkpoint vs torch")
    p.add_argument("--checkpoint", required=True, help="torch state dict to check")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--model-config")
    p.add_argument("--inputs", type=int, default=10)
    p.add_argument("--tolerance", type=float, default=1e-4)

    args = parser.parse_args(argv)
    try:
        if args.command == "convert-session":
            manifest = None
            if args.splits_manifest:
                with open(args.splits_manifest, "r", encoding="utf-8") as fh:
                    manifest = json.load(fh)
            report = convert_session(args.input, args.output, split=args.split,
                                     splits_manifest=manifest)
            print(report.as_text())
        elif args.command == "convert-checkpoint":
            config = _config_from_args(args)
            report = convert_checkpoint(args.input, config, args.output,
                                        name_map_path=args.name_map)
            print(report.as_text())
        else:
            config = _config_from_args(args)
            model = build_reference_model(config)
            model.load_state_dict(torch.load(args.checkpoint, map_location="cpu",
                                             weights_only=True))
            with tempfile.NamedTemporaryFile(suffix=".wkc") as tmp:
                convert_checkpoint(args.checkpoint, config, tmp.name)
                _, weights = load_checkpoint(tmp.name)
            result = logit_parity(model, config, weights,
                                  n_inputs=args.inputs, tolerance=args.tolerance)
            print(json.dumps({
                "max_abs_diff": result.max_abs_diff,
                "tolerance": result.tolerance,
                "n_inputs": result.n_inputs,
                "passed": result.passed,
            }))
            return 0 if result.passed else 4
    except (ValueError, OSError, KeyError) as exc:
        print(f"wristkeys-convert: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
