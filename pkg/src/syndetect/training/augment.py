"""Data augmentation for discriminator inputs.

Two pieces: additive uniform pixel noise (applied before both discriminators)
and a differentiable augmentation policy (translation up to 12.5%, cutout up
to 50%, color jitter) applied only to the real/synthetic pairs fed to the
image discriminator. All ops are differentiable so generator gradients pass
through.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F


def add_uniform_noise(x: torch.Tensor, amplitude: float, generator: torch.Generator | None = None) -> torch.Tensor:
    if amplitude <= 0:
        return x
    noise = (torch.rand(x.shape, generator=generator, dtype=x.dtype) * 2 - 1) * amplitude
    return x + noise


def _rand(shape, generator, low=0.0, high=1.0):
    return torch.rand(shape, generator=generator) * (high - low) + low


def _translate(x: torch.Tensor, generator, ratio: float = 0.125) -> torch.Tensor:
    n, _, h, w = x.shape
    max_dx, max_dy = int(w * ratio + 0.5), int(h * ratio + 0.5)
    dx = torch.randint(-max_dx, max_dx + 1, (n,), generator=generator)
    dy = torch.randint(-max_dy, max_dy + 1, (n,), generator=generator)
    pad = F.pad(x, (max_dx, max_dx, max_dy, max_dy))
    out = torch.stack(
        [
            pad[i, :, max_dy + dy[i] : max_dy + dy[i] + h, max_dx + dx[i] : max_dx + dx[i] + w]
            for i in range(n)
        ]
    )
    return out


def _cutout(x: torch.Tensor, generator, ratio: float = 0.5) -> torch.Tensor:
    n, _, h, w = x.shape
    ch, cw = int(h * ratio + 0.5), int(w * ratio + 0.5)
    cy = torch.randint(0, h - ch + 1, (n,), generator=generator)
    cx = torch.randint(0, w - cw + 1, (n,), generator=generator)
    mask = torch.ones(n, 1, h, w, dtype=x.dtype)
    for i in range(n):
        mask[i, :, cy[i] : cy[i] + ch, cx[i] : cx[i] + cw] = 0.0
    return x * mask


def _color(x: torch.Tensor, generator) -> torch.Tensor:
    n = x.shape[0]
    brightness = _rand((n, 1, 1, 1), generator, -0.25, 0.25).to(x.dtype)
    x = x + brightness
    mean_c = x.mean(dim=1, keepdim=True)
    saturation = _rand((n, 1, 1, 1), generator, 0.5, 1.5).to(x.dtype)
    x = (x - mean_c) * saturation + mean_c
    mean_all = x.flatten(1).mean(1).view(n, 1, 1, 1)
    contrast = _rand((n, 1, 1, 1), generator, 0.75, 1.25).to(x.dtype)
    return (x - mean_all) * contrast + mean_all


def diff_augment(x: torch.Tensor, generator: torch.Generator | None = None) -> torch.Tensor:
    x = _color(x, generator)
    x = _translate(x, generator)
    x = _cutout(x, generator)
    return x
