"""Command-line surface.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or invalid
files, bad field values), 3 numeric error (non-finite values in compute).
Results are emitted as one JSON record per line so downstream tooling can
consume them directly. Every option can also be supplied through a JSON
config file (--config); explicit command-line values win.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .augment import AcmConfig, acm_monte_carlo
from .decode import (
    DEFAULT_BLANK_INDEX,
    DecodeConfig,
    beam_search,
    greedy_decode,
    lm_score,
    load_charlm,
)
from .encoder import ModelConfig, PRESETS, count_flops, count_macs, count_params, init_weights
from .io import (
    NumericError,
    SimulatorSpec,
    load_checkpoint,
    read_session,
    save_checkpoint,
    simulate_session,
    write_session,
)
from .metrics import cer
from .normalize import RtnConfig
from .pipeline import compute_logits, run_pipeline, stream_session_logits

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    # spec'd exit code for usage problems is 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _merge_config_file(args: argparse.Namespace) -> None:
    path = getattr(args, "config", None)
    if not path:
        return
    with open(path, "r", encoding="utf-8") as fh:
        values = json.load(fh)
    if not isinstance(values, dict):
        raise ValueError("config file must hold a JSON object of option values")
    for key, value in values.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) is None:
            setattr(args, attr, value)


def _apply_defaults(args: argparse.Namespace, defaults: dict) -> None:
    for attr, value in defaults.items():
        if getattr(args, attr, None) is None:
            setattr(args, attr, value)


def _add_model_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS), help="named architecture preset")
    p.add_argument("--variant", choices=("joint_hand", "split_only", "split_and_share", "splashnet"))
    p.add_argument("--per-hand-width", type=int)
    p.add_argument("--conv-channels", type=int, nargs="+")
    p.add_argument("--kernel-width", type=int)
    p.add_argument("--vocab-size", type=int)
    p.add_argument("--n-freqs", type=int)


def _model_config(args: argparse.Namespace) -> ModelConfig:
    if args.preset:
        base = PRESETS[args.preset]
    else:
        base = ModelConfig()
    overrides = {}
    for attr in ("variant", "per_hand_width", "kernel_width", "vocab_size", "n_freqs"):
        if getattr(args, attr, None) is not None:
            overrides[attr] = getattr(args, attr)
    if getattr(args, "conv_channels", None) is not None:
        overrides["conv_channels"] = tuple(args.conv_channels)
    if not overrides:
        return base
    return ModelConfig.from_dict({**base.to_dict(), **{k: v for k, v in overrides.items()}})


def _add_rtn_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rtn-warmup", type=int)
    p.add_argument("--rtn-epsilon", type=float)
    p.add_argument("--rtn-window", type=int)


def _rtn_config(args: argparse.Namespace) -> RtnConfig:
    return RtnConfig(
        warmup_frames=args.rtn_warmup if args.rtn_warmup is not None else 125,
        epsilon=args.rtn_epsilon if args.rtn_epsilon is not None else 1e-6,
        window=args.rtn_window,
    )


def _add_decode_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lm", help="text n-gram language model; greedy decoding when absent")
    p.add_argument("--beam-size", type=int)
    p.add_argument("--lm-weight", type=float)
    p.add_argument("--insertion-bonus", type=float)
    p.add_argument("--blank-index", type=int)


def _decode_config(args: argparse.Namespace) -> DecodeConfig:
    return DecodeConfig(
        beam_size=args.beam_size if args.beam_size is not None else 50,
        lm_weight=args.lm_weight if args.lm_weight is not None else 1.5,
        insertion_bonus=args.insertion_bonus if args.insertion_bonus is not None else 0.5,
        blank_index=args.blank_index if args.blank_index is not None else DEFAULT_BLANK_INDEX,
    )


def _emit(record: dict, output) -> None:
    line = json.dumps(record, sort_keys=True)
    if output:
        with open(output, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
    else:
        print(line)


def _decode_one(payload: dict) -> dict:
    session = read_session(payload["session"])
    checkpoint = load_checkpoint(payload["checkpoint"])
    lm = load_charlm(payload["lm"]) if payload["lm"] else None
    rtn = RtnConfig(**payload["rtn"])
    cfg = DecodeConfig(**payload["decode"])
    t0 = time.perf_counter()
    keystrokes, breakdown = run_pipeline(session, checkpoint, cfg, lm=lm, rtn_config=rtn)
    return {
        "id": f"{session.participant_id}/{session.session_id}",
        "keystrokes": keystrokes,
        "cer": breakdown.cer,
        "substitutions": breakdown.substitutions,
        "deletions": breakdown.deletions,
        "insertions": breakdown.insertions,
        "reference_length": breakdown.reference_length,
        "runtime_s": round(time.perf_counter() - t0, 4),
    }


def _cmd_decode(args) -> int:
    rtn = _rtn_config(args)
    cfg = _decode_config(args)
    payloads = [
        {
            "session": path,
            "checkpoint": args.checkpoint,
            "lm": args.lm,
            "rtn": {"warmup_frames": rtn.warmup_frames, "epsilon": rtn.epsilon, "window": rtn.window},
            "decode": {
                "beam_size": cfg.beam_size,
                "lm_weight": cfg.lm_weight,
                "insertion_bonus": cfg.insertion_bonus,
                "blank_index": cfg.blank_index,
            },
        }
        for path in args.session
    ]
    if args.jobs and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_decode_one, payloads))
    else:
        results = [_decode_one(p) for p in payloads]
    for record in results:
        _emit(record, args.output)
    return EXIT_OK


def _cmd_stream(args) -> int:
    session = read_session(args.session)
    config, weights = load_checkpoint(args.checkpoint)
    rtn = _rtn_config(args)
    t0 = time.perf_counter()
    logits = stream_session_logits(session, config, weights, rtn, chunk_samples=args.chunk_samples or 160)
    cfg = _decode_config(args)
    if args.lm:
        keystrokes = beam_search(logits, load_charlm(args.lm), cfg)
    else:
        keystrokes = greedy_decode(logits, cfg.blank_index)
    breakdown = cer(session.reference_keystrokes, keystrokes)
    record = {
        "id": f"{session.participant_id}/{session.session_id}",
        "mode": "streaming",
        "keystrokes": keystrokes,
        "cer": breakdown.cer,
        "substitutions": breakdown.substitutions,
        "deletions": breakdown.deletions,
        "insertions": breakdown.insertions,
        "reference_length": breakdown.reference_length,
        "runtime_s": round(time.perf_counter() - t0, 4),
    }
    if args.verify_batch:
        batch = compute_logits(session, config, weights, rtn)
        record["max_abs_logit_diff"] = float(np.max(np.abs(batch - logits)))
    _emit(record, args.output)
    return EXIT_OK


def _read_text_arg(value: str) -> str:
    if value.startswith("@"):
        with open(value[1:], "r", encoding="utf-8") as fh:
            return fh.read().rstrip("\n")
    return value


def _cmd_eval_cer(args) -> int:
    reference = _read_text_arg(args.reference)
    hypothesis = _read_text_arg(args.hypothesis)
    breakdown = cer(reference, hypothesis)
    _emit(
        {
            "cer": breakdown.cer,
            "substitutions": breakdown.substitutions,
            "deletions": breakdown.deletions,
            "insertions": breakdown.insertions,
            "reference_length": breakdown.reference_length,
        },
        args.output,
    )
    return EXIT_OK


def _cmd_flops(args) -> int:
    config = _model_config(args)
    seconds = args.seconds if args.seconds is not None else 30.0
    frames = int(np.ceil(seconds * 125))
    _emit(
        {
            "preset": args.preset,
            "seconds": seconds,
            "frames": frames,
            "gflops_2_per_mac": count_flops(config, seconds) / 1e9,
            "gflops_1_per_mac": count_flops(config, seconds, flops_per_mac=1) / 1e9,
            "macs": count_macs(config, frames),
        },
        args.output,
    )
    return EXIT_OK


def _cmd_params(args) -> int:
    config = _model_config(args)
    _emit({"preset": args.preset, "params": count_params(config)}, args.output)
    return EXIT_OK


def _cmd_augment_stats(args) -> int:
    config = AcmConfig(
        apply_probability=args.apply_probability if args.apply_probability is not None else 2.0 / 3.0,
        f_max=args.f_max if args.f_max is not None else 12,
        num_bands=args.bands if args.bands is not None else 6,
    )
    draws = args.draws if args.draws is not None else 1_000_000
    seed = args.seed if args.seed is not None else 0
    single = acm_monte_carlo(config, draws, seed, force_n_masks=1)
    double = acm_monte_carlo(config, draws, seed + 1, force_n_masks=2)
    pipeline = acm_monte_carlo(config, draws, seed + 2)
    _emit(
        {
            "draws": draws,
            "full_erasure_given_1_mask": round(single["frac_full_width_any"], 3),
            "full_erasure_given_2_masks": round(double["frac_full_width_any"], 3),
            "union_covers_all_given_2_masks": round(double["frac_union_all_bands"], 3),
            "masked_fraction_masked_batches": round(pipeline["masked_fraction_masked_batches"], 3),
            "masked_fraction_all_batches": round(pipeline["masked_fraction_all_batches"], 3),
        },
        args.output,
    )
    return EXIT_OK


def _cmd_simulate(args) -> int:
    spec = SimulatorSpec(
        duration_s=args.duration if args.duration is not None else 4.0,
        keys_per_second=args.keys_per_second if args.keys_per_second is not None else 2.0,
        noise_std=args.noise_std if args.noise_std is not None else 0.05,
        split=args.split if args.split is not None else "test_domain_test",
        participant_id=args.participant or "sim-000",
        session_id=args.session_id or "sim-000-a",
    )
    record = simulate_session(spec, args.seed if args.seed is not None else 0)
    write_session(record, args.output_session)
    _emit(
        {
            "path": args.output_session,
            "n_samples": record.n_samples,
            "n_labels": len(record.labels),
            "reference": record.reference_keystrokes,
        },
        args.output,
    )
    return EXIT_OK


def _cmd_lm_check(args) -> int:
    lm = load_charlm(args.lm)
    record = {"order": lm.order, "counts": {str(k): v for k, v in lm.counts().items()}}
    if args.context is not None and args.next is not None:
        record["log10_score"] = lm_score(lm, tuple(args.context), args.next)
    _emit(record, args.output)
    return EXIT_OK


def _cmd_init_checkpoint(args) -> int:
    config = _model_config(args)
    weights = init_weights(config, args.seed if args.seed is not None else 0)
    save_checkpoint(config, weights, args.output_checkpoint)
    _emit({"path": args.output_checkpoint, "params": count_params(config)}, args.output)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="wristkeys", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file of default option values")
        p.add_argument("--output", help="append JSON records to this file instead of stdout")

    p = sub.add_parser("decode", help="decode sessions with a checkpoint (and optional LM)")
    p.add_argument("--session", nargs="+", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--jobs", type=int)
    _add_decode_options(p)
    _add_rtn_options(p)
    common(p)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("stream", help="frame-at-a-time decoding of one session")
    p.add_argument("--session", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--chunk-samples", type=int)
    p.add_argument("--verify-batch", action="store_true")
    _add_decode_options(p)
    _add_rtn_options(p)
    common(p)
    p.set_defaults(func=_cmd_stream)

    p = sub.add_parser("eval-cer", help="character error rate between two keystroke strings")
    p.add_argument("--reference", required=True, help="string, or @file to read one")
    p.add_argument("--hypothesis", required=True, help="string, or @file to read one")
    common(p)
    p.set_defaults(func=_cmd_eval_cer)

    p = sub.add_parser("flops", help="analytic forward-pass FLOPs")
    _add_model_options(p)
    p.add_argument("--seconds", type=float)
    common(p)
    p.set_defaults(func=_cmd_flops)

    p = sub.add_parser("params", help="analytic parameter count")
    _add_model_options(p)
    common(p)
    p.set_defaults(func=_cmd_params)

    p = sub.add_parser("augment-stats", help="Monte-Carlo channel-masking statistics")
    p.add_argument("--draws", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--f-max", type=int)
    p.add_argument("--bands", type=int)
    p.add_argument("--apply-probability", type=float)
    common(p)
    p.set_defaults(func=_cmd_augment_stats)

    p = sub.add_parser("simulate", help="generate a synthetic labelled session")
    p.add_argument("--output-session", required=True)
    p.add_argument("--duration", type=float)
    p.add_argument("--keys-per-second", type=float)
    p.add_argument("--noise-std", type=float)
    p.add_argument("--split")
    p.add_argument("--participant")
    p.add_argument("--session-id")
    p.add_argument("--seed", type=int)
    common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("lm-check", help="validate a language model file")
    p.add_argument("--lm", required=True)
    p.add_argument("--context", nargs="*", help="context symbols for an optional score query")
    p.add_argument("--next", help="next symbol for an optional score query")
    common(p)
    p.set_defaults(func=_cmd_lm_check)

    p = sub.add_parser("init-checkpoint", help="write a randomly initialized checkpoint")
    _add_model_options(p)
    p.add_argument("--output-checkpoint", required=True)
    p.add_argument("--seed", type=int)
    common(p)
    p.set_defaults(func=_cmd_init_checkpoint)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _merge_config_file(args)
        return args.func(args)
    except NumericError as exc:
        print(f"wristkeys: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"wristkeys: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
