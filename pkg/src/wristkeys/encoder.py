"""Forward pass of the rotation-invariant MLP + time-depth-separable conv encoder.

Four wiring variants share the same building blocks:

- joint_hand: per-hand MLPs, concatenated to one wide conv stack;
- split_only: per-hand MLPs and per-hand conv stacks with separate weights;
- split_and_share: per-hand streams that resolve to one shared weight set;
- splashnet: split_and_share widened to 528 per hand with the last two conv
  blocks at 48 channels.

The streams merge only at the final linear head. All convolutions are causal
(left zero padding), stride 1, so the frame rate is preserved and the
receptive field of the default stack is exactly 1 + 4*(w-1) = 125 frames.
Parameter and FLOP accounting is analytic over the named tensors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .validation import N_CHANNELS, FRAMES_PER_SECOND, check_feature_tensor

LAYER_NORM_EPS = 1e-5
VARIANTS = ("joint_hand", "split_only", "split_and_share", "splashnet")


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "split_and_share"
    per_hand_width: int = 384
    conv_channels: tuple[int, ...] = (24, 24, 24, 24)
    kernel_width: int = 32
    mlp_layer_sizes: tuple[int, ...] | None = None
    offsets: tuple[int, ...] = (-1, 0, 1)
    vocab_size: int = 100
    n_freqs: int = 6

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.kernel_width < 1:
            raise ValueError("kernel_width must be >= 1")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2 (at least one symbol plus blank)")
        if self.n_freqs < 1:
            raise ValueError("n_freqs must be >= 1")
        if not self.offsets:
            raise ValueError("offsets must be non-empty")
        if any(abs(o) >= N_CHANNELS for o in self.offsets):
            raise ValueError(f"offsets must satisfy |o| < {N_CHANNELS}")
        object.__setattr__(self, "conv_channels", tuple(self.conv_channels))
        object.__setattr__(self, "offsets", tuple(self.offsets))
        if self.mlp_layer_sizes is not None:
            object.__setattr__(self, "mlp_layer_sizes", tuple(self.mlp_layer_sizes))
            if self.mlp_layer_sizes[-1] != self.per_hand_width:
                raise ValueError("last MLP layer size must equal per_hand_width")
        width = self.stack_width
        for k in self.conv_channels:
            if width % k != 0:
                raise ValueError(f"stack width {width} not divisible by conv channels {k}")

    @property
    def shares_weights(self) -> bool:
        return self.variant in ("split_and_share", "splashnet")

    @property
    def stack_width(self) -> int:
        """Feature width of one conv stack (2D joint, D per hand otherwise)."""
        if self.variant == "joint_hand":
            return 2 * self.per_hand_width
        return self.per_hand_width

    @property
    def mlp_sizes(self) -> tuple[int, ...]:
        return self.mlp_layer_sizes if self.mlp_layer_sizes is not None else (self.per_hand_width,)

    @property
    def mlp_streams(self) -> tuple[str, ...]:
        return ("shared",) if self.shares_weights else ("left", "right")

    @property
    def tds_streams(self) -> tuple[str, ...]:
        if self.variant == "joint_hand":
            return ("joint",)
        return ("shared",) if self.shares_weights else ("left", "right")

    def mlp_stream_for_hand(self, hand: int) -> str:
        return "shared" if self.shares_weights else ("left", "right")[hand]

    def tds_stream_for_hand(self, hand: int) -> str:
        return "shared" if self.shares_weights else ("left", "right")[hand]

    @property
    def receptive_field_frames(self) -> int:
        return 1 + len(self.conv_channels) * (self.kernel_width - 1)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "per_hand_width": self.per_hand_width,
            "conv_channels": list(self.conv_channels),
            "kernel_width": self.kernel_width,
            "mlp_layer_sizes": list(self.mlp_layer_sizes) if self.mlp_layer_sizes is not None else None,
            "offsets": list(self.offsets),
            "vocab_size": self.vocab_size,
            "n_freqs": self.n_freqs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        kwargs = dict(d)
        for key in ("conv_channels", "offsets"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        if kwargs.get("mlp_layer_sizes") is not None:
            kwargs["mlp_layer_sizes"] = tuple(kwargs["mlp_layer_sizes"])
        return cls(**kwargs)


PRESETS: dict[str, ModelConfig] = {
    "baseline": ModelConfig(variant="joint_hand", n_freqs=33),
    "joint_rsg": ModelConfig(variant="joint_hand", n_freqs=6),
    "split": ModelConfig(variant="split_only", n_freqs=6),
    "splashnet_mini": ModelConfig(variant="split_and_share", n_freqs=6),
    "splashnet": ModelConfig(
        variant="splashnet", per_hand_width=528, conv_channels=(24, 24, 48, 48), n_freqs=6
    ),
}


def tensor_spec(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Name -> shape for every tensor the variant requires (shared listed once)."""
    spec: dict[str, tuple[int, ...]] = {}
    in_width = N_CHANNELS * config.n_freqs
    for stream in config.mlp_streams:
        prev = in_width
        for i, size in enumerate(config.mlp_sizes):
            spec[f"mlp.{stream}.layer{i}.weight"] = (prev, size)
            spec[f"mlp.{stream}.layer{i}.bias"] = (size,)
            prev = size
    d = config.stack_width
    for stream in config.tds_streams:
        for i, k in enumerate(config.conv_channels):
            base = f"tds.{stream}.block{i}"
            spec[f"{base}.conv.weight"] = (k, k, config.kernel_width)
            spec[f"{base}.conv.bias"] = (k,)
            spec[f"{base}.ln1.scale"] = (d,)
            spec[f"{base}.ln1.shift"] = (d,)
            spec[f"{base}.fc1.weight"] = (d, d)
            spec[f"{base}.fc1.bias"] = (d,)
            spec[f"{base}.fc2.weight"] = (d, d)
            spec[f"{base}.fc2.bias"] = (d,)
            spec[f"{base}.ln2.scale"] = (d,)
            spec[f"{base}.ln2.shift"] = (d,)
    spec["head.weight"] = (2 * config.per_hand_width, config.vocab_size)
    spec["head.bias"] = (config.vocab_size,)
    return spec


@dataclass
class WeightStore:
    """Named float32 tensors for one model; immutable by convention after load."""

    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.tensors[name]
        except KeyError:
            raise KeyError(f"missing tensor {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    @property
    def names(self) -> list[str]:
        return sorted(self.tensors)

    def validate(self, config: ModelConfig) -> None:
        spec = tensor_spec(config)
        for name, shape in spec.items():
            if name not in self.tensors:
                raise ValueError(f"missing tensor {name!r}")
            if tuple(self.tensors[name].shape) != tuple(shape):
                raise ValueError(
                    f"tensor {name!r} has shape {self.tensors[name].shape}, expected {shape}"
                )
        for name, arr in self.tensors.items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"tensor {name!r} contains NaN or Inf")

    def mlp_layers(self, config: ModelConfig, stream: str) -> list[tuple[np.ndarray, np.ndarray]]:
        return [
            (self[f"mlp.{stream}.layer{i}.weight"], self[f"mlp.{stream}.layer{i}.bias"])
            for i in range(len(config.mlp_sizes))
        ]


def init_weights(config: ModelConfig, rng_seed: int = 0) -> WeightStore:
    """Randomly initialized weights: N(0, 1/sqrt(fan_in)) matrices, zero biases."""
    rng = np.random.default_rng(rng_seed)
    tensors = {}
    for name, shape in tensor_spec(config).items():
        if name.endswith(".scale"):
            arr = np.ones(shape)
        elif name.endswith(".bias") or name.endswith(".shift"):
            arr = np.zeros(shape)
        elif name.endswith("conv.weight"):
            fan_in = shape[1] * shape[2]
            arr = rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=shape)
        else:
            arr = rng.normal(0.0, 1.0 / math.sqrt(shape[0]), size=shape)
        tensors[name] = arr.astype(np.float32)
    return WeightStore(tensors)


def layer_norm(x: np.ndarray, scale: np.ndarray, shift: np.ndarray,
               eps: float = LAYER_NORM_EPS) -> np.ndarray:
    """Per-frame normalization over the feature axis, then affine scale/shift."""
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * scale + shift


def rimlp_forward(
    hand_features: np.ndarray,
    mlp_layers: list[tuple[np.ndarray, np.ndarray]],
    offsets: tuple[int, ...] = (-1, 0, 1),
) -> np.ndarray:
    """Average of the MLP applied to cyclically rotated electrode layouts.

    hand_features is [T, 16 channels, F]; each offset rolls the channel axis,
    the result is flattened channel-major to [T, 16*F] and pushed through the
    Linear+ReLU layers; the |offsets| outputs are averaged.
    """
    x = np.asarray(hand_features, dtype=np.float64)
    if x.ndim != 3 or x.shape[1] != N_CHANNELS:
        raise ValueError(f"expected [T, {N_CHANNELS}, F] per-hand features, got shape {x.shape}")
    if any(abs(o) >= N_CHANNELS for o in offsets):
        raise ValueError(f"offsets must satisfy |o| < {N_CHANNELS}")
    t = x.shape[0]
    acc = None
    for o in sorted(offsets):
        h = np.roll(x, o, axis=1).reshape(t, -1)
        for w, b in mlp_layers:
            h = np.maximum(h @ w + b, 0.0)
        acc = h if acc is None else acc + h
    return acc / len(offsets)


def tds_conv_block(
    x: np.ndarray,
    theta: np.ndarray,
    bias: np.ndarray,
    ln_params: tuple[np.ndarray, np.ndarray] | None,
) -> np.ndarray:
    """Causal time conv mixing K channels with weights reused across the hidden width.

    x is [T, D] with D = K*H; theta is [K_out, K_in, w]. The frame axis is
    left-padded with w-1 zeros, so output t sums inputs t-i for lags
    i = 0..w-1. Output is LayerNorm(ReLU(conv(x)) + x); pass ln_params=None
    to skip the normalization.
    """
    x = np.asarray(x, dtype=np.float64)
    t, d = x.shape
    k, k_in, w = theta.shape
    if k != k_in:
        raise ValueError("conv kernel must map K channels to K channels")
    if d % k != 0:
        raise ValueError(f"feature width {d} not divisible by conv channels {k}")
    h = d // k
    xr = x.reshape(t, k, h)
    xp = np.concatenate([np.zeros((w - 1, k, h)), xr], axis=0)
    acc = np.zeros((t, h, k))
    for i in range(w):
        seg = xp[w - 1 - i : w - 1 - i + t]  # input frames t-i
        acc += np.tensordot(seg, theta[:, :, i], axes=([1], [1]))
    z = np.moveaxis(acc, 1, 2) + np.asarray(bias, dtype=np.float64)[None, :, None]
    out = (np.maximum(z, 0.0) + xr).reshape(t, d)
    if ln_params is not None:
        out = layer_norm(out, ln_params[0], ln_params[1])
    return out


def tds_fc_block(
    x: np.ndarray,
    fc1: tuple[np.ndarray, np.ndarray],
    fc2: tuple[np.ndarray, np.ndarray],
    ln_params: tuple[np.ndarray, np.ndarray] | None,
) -> np.ndarray:
    """Residual two-layer feed-forward block: LayerNorm(FC2(ReLU(FC1(x))) + x)."""
    x = np.asarray(x, dtype=np.float64)
    w1, b1 = fc1
    w2, b2 = fc2
    if w1.shape[0] != x.shape[1] or w2.shape[1] != x.shape[1]:
        raise ValueError("fully connected weights do not match the feature width")
    z = np.maximum(x @ w1 + b1, 0.0) @ w2 + b2 + x
    if ln_params is not None:
        z = layer_norm(z, ln_params[0], ln_params[1])
    return z


@dataclass(frozen=True)
class EncoderOutput:
    logits: np.ndarray  # [T, vocab]
    pre_head: np.ndarray  # [T, 2D] concatenated hand embeddings (left | right)


def _run_tds_stack(x: np.ndarray, config: ModelConfig, weights: WeightStore, stream: str) -> np.ndarray:
    for i in range(len(config.conv_channels)):
        base = f"tds.{stream}.block{i}"
        x = tds_conv_block(
            x,
            weights[f"{base}.conv.weight"],
            weights[f"{base}.conv.bias"],
            (weights[f"{base}.ln1.scale"], weights[f"{base}.ln1.shift"]),
        )
        x = tds_fc_block(
            x,
            (weights[f"{base}.fc1.weight"], weights[f"{base}.fc1.bias"]),
            (weights[f"{base}.fc2.weight"], weights[f"{base}.fc2.bias"]),
            (weights[f"{base}.ln2.scale"], weights[f"{base}.ln2.shift"]),
        )
    return x


def encode(features: np.ndarray, config: ModelConfig, weights: WeightStore) -> EncoderOutput:
    """Full forward pass: normalized features [T, 2, 16, F] to per-frame logits."""
    features = check_feature_tensor(features, n_freqs=config.n_freqs, name="encoder input")
    weights.validate(config)
    hands = []
    for hand in range(2):
        layers = weights.mlp_layers(config, config.mlp_stream_for_hand(hand))
        hands.append(rimlp_forward(features[:, hand], layers, config.offsets))

    if config.variant == "joint_hand":
        pre_head = _run_tds_stack(np.concatenate(hands, axis=1), config, weights, "joint")
    else:
        encoded = [
            _run_tds_stack(hands[hand], config, weights, config.tds_stream_for_hand(hand))
            for hand in range(2)
        ]
        pre_head = np.concatenate(encoded, axis=1)
    logits = pre_head @ weights["head.weight"] + weights["head.bias"]
    return EncoderOutput(logits=logits, pre_head=pre_head)


def linear_param_count(n_in: int, n_out: int) -> int:
    """Parameters of one linear layer with bias."""
    return n_in * n_out + n_out


def count_params(config: ModelConfig) -> int:
    """Exact parameter count over all named tensors (shared tensors once)."""
    return sum(int(np.prod(shape)) for shape in tensor_spec(config).values())


def count_macs(config: ModelConfig, n_frames: int) -> int:
    """Multiply-accumulate count of a forward pass over n_frames frames.

    Counts matrix products only (MLP, conv, FC, head); normalizations and
    activations are excluded. Weight sharing does not reduce compute: shared
    streams still run once per hand.
    """
    in_width = N_CHANNELS * config.n_freqs
    per_frame = 0
    # rotation-invariant MLP: every offset is a full pass, both hands
    prev = in_width
    mlp = 0
    for size in config.mlp_sizes:
        mlp += prev * size
        prev = size
    per_frame += 2 * len(config.offsets) * mlp
    # conv stacks: one joint stack or one per hand
    d = config.stack_width
    n_stacks = 1 if config.variant == "joint_hand" else 2
    for k in config.conv_channels:
        h = d // k
        per_frame += n_stacks * (k * k * h * config.kernel_width + 2 * d * d)
    per_frame += 2 * config.per_hand_width * config.vocab_size  # head
    return per_frame * n_frames


def count_flops(config: ModelConfig, input_seconds: float, flops_per_mac: int = 2) -> float:
    """Analytic forward-pass FLOPs for ceil(input_seconds * 125) frames."""
    if input_seconds < 0:
        raise ValueError("input_seconds must be >= 0")
    n_frames = math.ceil(input_seconds * FRAMES_PER_SECOND)
    return float(flops_per_mac * count_macs(config, n_frames))


class EncoderStream:
    """Frame-at-a-time encoder with per-block ring buffers of past conv inputs."""

    def __init__(self, config: ModelConfig, weights: WeightStore):
        weights.validate(config)
        self.config = config
        self.weights = weights
        # per-hand buffers even when the weights are shared
        keys = ["joint"] if config.variant == "joint_hand" else ["hand0", "hand1"]
        d = config.stack_width
        self._histories: dict[tuple[str, int], np.ndarray] = {
            (key, i): np.zeros((config.kernel_width - 1, k, d // k))
            for key in keys
            for i, k in enumerate(config.conv_channels)
        }

    def _stack_step(self, x: np.ndarray, weight_stream: str, buffer_key: str) -> np.ndarray:
        cfg, w = self.config, self.weights
        width = self.config.kernel_width
        for i, k in enumerate(cfg.conv_channels):
            base = f"tds.{weight_stream}.block{i}"
            h = x.shape[0] // k
            xr = x.reshape(k, h)
            hist = self._histories[(buffer_key, i)]
            theta = w[f"{base}.conv.weight"].astype(np.float64)
            acc = np.zeros((h, k))
            # lag 0 is the current frame; lag i>0 reads the history tail
            acc += np.tensordot(xr, theta[:, :, 0], axes=([0], [1]))
            for lag in range(1, width):
                acc += np.tensordot(hist[width - 1 - lag], theta[:, :, lag], axes=([0], [1]))
            z = acc.T + np.asarray(w[f"{base}.conv.bias"], dtype=np.float64)[:, None]
            out = (np.maximum(z, 0.0) + xr).reshape(-1)
            out = layer_norm(out, w[f"{base}.ln1.scale"], w[f"{base}.ln1.shift"])
            self._histories[(buffer_key, i)] = np.concatenate([hist[1:], xr[None]], axis=0)
            x = tds_fc_block(
                out[None],
                (w[f"{base}.fc1.weight"], w[f"{base}.fc1.bias"]),
                (w[f"{base}.fc2.weight"], w[f"{base}.fc2.bias"]),
                (w[f"{base}.ln2.scale"], w[f"{base}.ln2.shift"]),
            )[0]
        return x

    def push(self, frame: np.ndarray) -> np.ndarray:
        """One normalized feature frame [2, 16, F] in, one logit frame [V] out."""
        frame = np.asarray(frame, dtype=np.float64)
        cfg = self.config
        hands = []
        for hand in range(2):
            layers = self.weights.mlp_layers(cfg, cfg.mlp_stream_for_hand(hand))
            hands.append(rimlp_forward(frame[hand][None], layers, cfg.offsets)[0])
        if cfg.variant == "joint_hand":
            pre = self._stack_step(np.concatenate(hands), "joint", "joint")
        else:
            pre = np.concatenate([
                self._stack_step(hands[hand], cfg.tds_stream_for_hand(hand), f"hand{hand}")
                for hand in range(2)
            ])
        return pre @ self.weights["head.weight"] + self.weights["head.bias"]
