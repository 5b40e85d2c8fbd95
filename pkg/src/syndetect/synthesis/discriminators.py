"""Projection discriminators.

The label enters only through the inner product between its embedding and the
pooled feature vector. Spectral normalization is applied throughout for
training stability. The auxiliary discriminator shares the architecture but
consumes difference images (elements in [-1, 1]).
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.nn.utils.parametrizations import spectral_norm

from ..core.errors import ShapeError


class _DiscBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, down: bool = True):
        super().__init__()
        self.down = down
        self.conv1 = spectral_norm(nn.Conv2d(c_in, c_out, 3, padding=1))
        self.conv2 = spectral_norm(nn.Conv2d(c_out, c_out, 3, padding=1))
        self.skip = spectral_norm(nn.Conv2d(c_in, c_out, 1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.conv2(F.relu(self.conv1(F.relu(x))))
        s = self.skip(x)
        if self.down:
            h = F.avg_pool2d(h, 2)
            s = F.avg_pool2d(s, 2)
        return h + s


class ProjectionDiscriminator(nn.Module):
    def __init__(self, num_classes: int, width: int = 128, in_channels: int = 3):
        super().__init__()
        self.num_classes = num_classes
        self.stem = spectral_norm(nn.Conv2d(in_channels, width, 3, padding=1))
        self.blocks = nn.ModuleList(
            [
                _DiscBlock(width, width),
                _DiscBlock(width, 2 * width),
                _DiscBlock(2 * width, 2 * width, down=False),
            ]
        )
        self.linear = spectral_norm(nn.Linear(2 * width, 1))
        self.embed = spectral_norm(nn.Embedding(num_classes, 2 * width))

    def features(self, x: torch.Tensor) -> torch.Tensor:
        h = self.stem(x)
        for block in self.blocks:
            h = block(h)
        return F.relu(h).sum(dim=(2, 3))

    def forward(self, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        """Per-sample realism score; labels enter via the projection term only."""
        if x.ndim != 4:
            raise ShapeError("discriminator expects rank-4 inputs")
        h = self.features(x)
        return self.linear(h).squeeze(1) + (self.embed(y) * h).sum(1)


class AuxDiscriminator(ProjectionDiscriminator):
    """Scores difference images x - x'; same conditioning scheme."""
