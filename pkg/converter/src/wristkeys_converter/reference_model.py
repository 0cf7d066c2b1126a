"""Reference-shaped PyTorch implementation of the encoder family.

Used by the parity harness: the torch forward pass is the independent
"source framework" side, while state_dict naming follows the layout covered
by name_map.json. The math mirrors the engine contract: rotation-invariant
MLP (average over rolled electrode layouts), causal time-depth-separable
conv blocks with residuals and layer norm, and a final linear head over the
concatenated hand embeddings.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from wristkeys.encoder import ModelConfig


class TdsBlock(nn.Module):
    def __init__(self, width: int, channels: int, kernel_width: int):
        super().__init__()
        self.channels = channels
        self.kernel_width = kernel_width
        self.conv = nn.Conv2d(channels, channels, kernel_size=(1, kernel_width))
        self.ln1 = nn.LayerNorm(width)
        self.fc1 = nn.Linear(width, width)
        self.fc2 = nn.Linear(width, width)
        self.ln2 = nn.LayerNorm(width)

    def forward(self, x: torch.Tensor) -> torch.Tensor:  # [T, width]
        t, width = x.shape
        k = self.channels
        h = width // k
        xr = x.reshape(t, k, h).permute(1, 2, 0).unsqueeze(0)  # [1, K, H, T]
        padded = F.pad(xr, (self.kernel_width - 1, 0))
        z = self.conv(padded)  # causal: output t sees inputs t-w+1..t
        z = torch.relu(z) + xr
        out = z.squeeze(0).permute(2, 0, 1).reshape(t, width)
        out = self.ln1(out)
        inner = self.fc2(torch.relu(self.fc1(out))) + out
        return self.ln2(inner)


class ReferenceEncoder(nn.Module):
    """Forward-compatible torch twin of the engine's encode()."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        in_width = 16 * config.n_freqs
        self.mlp = nn.ModuleDict()
        for stream in config.mlp_streams:
            layers = nn.ModuleList()
            prev = in_width
            for size in config.mlp_sizes:
                layers.append(nn.Linear(prev, size))
                prev = size
            self.mlp[stream] = layers
        self.tds = nn.ModuleDict()
        for stream in config.tds_streams:
            self.tds[stream] = nn.ModuleList(
                [TdsBlock(config.stack_width, k, config.kernel_width) for k in config.conv_channels]
            )
        self.head = nn.Linear(2 * config.per_hand_width, config.vocab_size)

    def _rimlp(self, hand_features: torch.Tensor, stream: str) -> torch.Tensor:
        t = hand_features.shape[0]
        acc = None
        for offset in sorted(self.config.offsets):
            rolled = torch.roll(hand_features, offset, dims=1).reshape(t, -1)
            h = rolled
            for layer in self.mlp[stream]:
                h = torch.relu(layer(h))
            acc = h if acc is None else acc + h
        return acc / len(self.config.offsets)

    def forward(self, features: torch.Tensor) -> torch.Tensor:  # [T, 2, 16, F]
        cfg = self.config
        hands = [
            self._rimlp(features[:, hand], cfg.mlp_stream_for_hand(hand)) for hand in range(2)
        ]
        if cfg.variant == "joint_hand":
            x = torch.cat(hands, dim=1)
            for block in self.tds["joint"]:
                x = block(x)
            pre_head = x
        else:
            encoded = []
            for hand in range(2):
                x = hands[hand]
                for block in self.tds[cfg.tds_stream_for_hand(hand)]:
                    x = block(x)
                encoded.append(x)
            pre_head = torch.cat(encoded, dim=1)
        return self.head(pre_head)


def build_reference_model(config: ModelConfig, seed: int = 0) -> ReferenceEncoder:
    torch.manual_seed(seed)
    model = ReferenceEncoder(config)
    model.eval()
    return model
