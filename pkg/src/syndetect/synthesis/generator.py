"""Conditional generator with class-conditional batch norm and chunked latents.

The 80-d latent is split into 4 contiguous slices: one seeds the 4x4 input
feature map, the rest are concatenated with the label embedding to drive the
conditional batch-norm layers of each up-sampling block (4 -> 8 -> 16 -> 32).
Output is tanh rescaled to [0, 1].
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..core.errors import ConfigurationError, ShapeError
from .encoder import LATENT_DIM, LatentCode

NUM_CHUNKS = 4
CHUNK_DIM = LATENT_DIM // NUM_CHUNKS


class ConditionalBatchNorm(nn.Module):
    """Batch norm whose scale/shift are linear functions of the conditioning vector."""

    def __init__(self, channels: int, cond_dim: int):
        super().__init__()
        self.bn = nn.BatchNorm2d(channels, affine=False)
        self.gain = nn.Linear(cond_dim, channels)
        self.bias = nn.Linear(cond_dim, channels)
        nn.init.zeros_(self.gain.weight)
        nn.init.zeros_(self.gain.bias)
        nn.init.zeros_(self.bias.weight)
        nn.init.zeros_(self.bias.bias)

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        gain = (1.0 + self.gain(cond)).unsqueeze(-1).unsqueeze(-1)
        bias = self.bias(cond).unsqueeze(-1).unsqueeze(-1)
        return self.bn(x) * gain + bias


class _GenBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, cond_dim: int):
        super().__init__()
        self.cbn1 = ConditionalBatchNorm(c_in, cond_dim)
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.cbn2 = ConditionalBatchNorm(c_out, cond_dim)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.skip = nn.Conv2d(c_in, c_out, 1)

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        h = F.interpolate(F.relu(self.cbn1(x, cond)), scale_factor=2, mode="nearest")
        h = self.conv1(h)
        h = self.conv2(F.relu(self.cbn2(h, cond)))
        return h + self.skip(F.interpolate(x, scale_factor=2, mode="nearest"))


class Generator(nn.Module):
    num_chunks = NUM_CHUNKS

    def __init__(self, num_classes: int, base_channels: int = 256, embed_dim: int = 32):
        super().__init__()
        self.num_classes = num_classes
        self.base_channels = base_channels
        self.embed_dim = embed_dim
        self.embed = nn.Embedding(num_classes, embed_dim)
        cond_dim = embed_dim + CHUNK_DIM
        widths = [base_channels, base_channels // 2, base_channels // 4]
        self.fc_in = nn.Linear(CHUNK_DIM, base_channels * 4 * 4)
        self.blocks = nn.ModuleList(
            [
                _GenBlock(widths[0], widths[0], cond_dim),
                _GenBlock(widths[0], widths[1], cond_dim),
                _GenBlock(widths[1], widths[2], cond_dim),
            ]
        )
        self.bn_out = nn.BatchNorm2d(widths[2])
        self.conv_out = nn.Conv2d(widths[2], 3, 3, padding=1)

    def forward(self, z: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        if z.ndim != 2 or z.shape[1] != LATENT_DIM:
            raise ShapeError(f"generator expects latents of shape (n, {LATENT_DIM}), got {tuple(z.shape)}")
        if y.ndim != 1 or len(y) != len(z):
            raise ShapeError("labels must be a rank-1 tensor aligned with the latents")
        if y.numel() and (y.min().item() < 0 or y.max().item() >= self.num_classes):
            raise ConfigurationError(f"label out of range [0, {self.num_classes})")
        chunks = torch.split(z, CHUNK_DIM, dim=1)
        emb = self.embed(y)
        h = self.fc_in(chunks[0]).view(len(z), self.base_channels, 4, 4)
        for block, chunk in zip(self.blocks, chunks[1:]):
            h = block(h, torch.cat([emb, chunk], dim=1))
        x = torch.tanh(self.conv_out(F.relu(self.bn_out(h))))
        return (x + 1.0) / 2.0


def synthesize(generator: Generator, z: "LatentCode | torch.Tensor", y: torch.Tensor) -> torch.Tensor:
    """Synthesize images from a latent code (its sample) under labels ``y``."""
    latent = z.sample if isinstance(z, LatentCode) else z
    return generator(latent, y)
