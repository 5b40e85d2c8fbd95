"""Encoder: summarizes an image's low-level features as an 80-d Gaussian code.

Conv stack (kernel 4, stride 2, padding 1 unless noted):
3 -> 64 -> 128 -> 256, then 256 -> 80 with no padding down to 1x1, then two
parallel Linear(80 -> 80) heads for the mean and log-variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..core.errors import NumericError, ShapeError

LATENT_DIM = 80


@dataclass
class LatentCode:
    mean: torch.Tensor          # (n, 80)
    log_variance: torch.Tensor  # (n, 80)
    sample: torch.Tensor        # (n, 80); equals mean at inference

    def __post_init__(self) -> None:
        for name in ("mean", "log_variance", "sample"):
            t = getattr(self, name)
            if t.ndim != 2 or t.shape[1] != LATENT_DIM:
                raise ShapeError(f"LatentCode.{name}: expected (n, {LATENT_DIM}), got {tuple(t.shape)}")


class Encoder(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 64, 4, stride=2, padding=1)
        self.conv2 = nn.Conv2d(64, 128, 4, stride=2, padding=1)
        self.bn2 = nn.BatchNorm2d(128)
        self.conv3 = nn.Conv2d(128, 256, 4, stride=2, padding=1)
        self.bn3 = nn.BatchNorm2d(256)
        self.conv4 = nn.Conv2d(256, LATENT_DIM, 4, stride=2, padding=0)
        self.fc_mean = nn.Linear(LATENT_DIM, LATENT_DIM)
        self.fc_logvar = nn.Linear(LATENT_DIM, LATENT_DIM)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if x.ndim != 4 or tuple(x.shape[1:]) != (3, 32, 32):
            raise ShapeError(f"encoder expects (n, 3, 32, 32), got {tuple(x.shape)}")
        stages = [
            ("conv1", lambda t: F.relu(self.conv1(t))),
            ("conv2", lambda t: F.relu(self.bn2(self.conv2(t)))),
            ("conv3", lambda t: F.relu(self.bn3(self.conv3(t)))),
            ("conv4", lambda t: self.conv4(t).flatten(1)),
        ]
        h = x
        for i, (name, fn) in enumerate(stages):
            h = fn(h)
            if not torch.isfinite(h).all():
                raise NumericError(f"encoder: non-finite activations after layer {i} ({name})")
        mean = self.fc_mean(h)
        log_variance = self.fc_logvar(h)
        if not (torch.isfinite(mean).all() and torch.isfinite(log_variance).all()):
            raise NumericError("encoder: non-finite Gaussian parameters at the linear heads")
        return mean, log_variance


def encode(
    encoder: Encoder,
    x: torch.Tensor,
    training: bool = False,
    generator: torch.Generator | None = None,
) -> LatentCode:
    """Reparameterized sample during training, deterministic mean at inference."""
    mean, log_variance = encoder(x)
    if training:
        eps = torch.randn(mean.shape, generator=generator, dtype=mean.dtype, device=mean.device)
        sample = mean + torch.exp(0.5 * log_variance) * eps
    else:
        sample = mean
    return LatentCode(mean=mean, log_variance=log_variance, sample=sample)
