"""Differentiable structural similarity for unit-range images.

Gaussian window of size 11 with sigma 1.5 and the standard stability constants
C1 = (0.01 * L)^2, C2 = (0.03 * L)^2 with dynamic range L = 1. The per-sample
index is the mean of the local SSIM map over valid window positions and
channels; values lie in [-1, 1]. Gradients come from autograd, no
approximations.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from ..core.errors import ShapeError

WINDOW_SIZE = 11
SIGMA = 1.5
K1 = 0.01
K2 = 0.03


def gaussian_window(size: int = WINDOW_SIZE, sigma: float = SIGMA, dtype=torch.float32) -> torch.Tensor:
    coords = torch.arange(size, dtype=dtype) - (size - 1) / 2.0
    g = torch.exp(-(coords**2) / (2 * sigma**2))
    g = g / g.sum()
    return g.outer(g)


def ssim(
    x: torch.Tensor,
    y: torch.Tensor,
    window_size: int = WINDOW_SIZE,
    sigma: float = SIGMA,
    k1: float = K1,
    k2: float = K2,
) -> torch.Tensor:
    """Per-sample SSIM index, shape (n,)."""
    if x.shape != y.shape:
        raise ShapeError(f"ssim: shape mismatch {tuple(x.shape)} vs {tuple(y.shape)}")
    if x.ndim != 4:
        raise ShapeError("ssim: expected rank-4 batches")
    n, c, h, w = x.shape
    if h < window_size or w < window_size:
        raise ShapeError(f"ssim: images {h}x{w} smaller than window {window_size}")

    window = gaussian_window(window_size, sigma, dtype=x.dtype).to(x.device)
    kernel = window.expand(c, 1, window_size, window_size)

    def blur(t):
        return F.conv2d(t, kernel, groups=c)

    mu_x = blur(x)
    mu_y = blur(y)
    var_x = blur(x * x) - mu_x * mu_x
    var_y = blur(y * y) - mu_y * mu_y
    cov = blur(x * y) - mu_x * mu_y

    c1 = (k1 * 1.0) ** 2
    c2 = (k2 * 1.0) ** 2
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / ((mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2))
    return ssim_map.flatten(1).mean(1)


def ssim_constant_pair(a: float, b: float, k1: float = K1, k2: float = K2) -> float:
    """Closed form for two constant images: variances vanish, only luminance remains."""
    c1 = (k1 * 1.0) ** 2
    return (2 * a * b + c1) / (a * a + b * b + c1)
