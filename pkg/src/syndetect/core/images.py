"""Image batch contract and pixel-space helpers.

An image batch is a float tensor shaped ``(n, channels, height, width)`` with
values in [0, 1]. Attack budgets are expressed in these raw pixel units; any
model-specific normalization happens inside classifier forward passes.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .errors import ShapeError

VALID_CHANNELS = (1, 3)
VALID_SIZES = (28, 32)

# Canonical input space of the synthesis stack.
SYNTH_CHANNELS = 3
SYNTH_SIZE = 32


def validate_image_batch(x: torch.Tensor, name: str = "batch") -> torch.Tensor:
    """Check the ImageBatch invariants, returning the tensor unchanged."""
    if not isinstance(x, torch.Tensor) or x.ndim != 4:
        raise ShapeError(f"{name}: expected a rank-4 tensor (n, c, h, w)")
    _, c, h, w = x.shape
    if c not in VALID_CHANNELS:
        raise ShapeError(f"{name}: channels must be one of {VALID_CHANNELS}, got {c}")
    if h != w or h not in VALID_SIZES:
        raise ShapeError(f"{name}: height/width must be square in {VALID_SIZES}, got {h}x{w}")
    if not torch.isfinite(x).all():
        raise ShapeError(f"{name}: contains non-finite values")
    if x.min().item() < 0.0 or x.max().item() > 1.0:
        raise ShapeError(f"{name}: pixel values outside [0, 1]")
    return x


def validate_label_batch(y: torch.Tensor, num_classes: int, name: str = "labels") -> torch.Tensor:
    if not isinstance(y, torch.Tensor) or y.ndim != 1:
        raise ShapeError(f"{name}: expected a rank-1 integer tensor")
    if y.numel() and (y.min().item() < 0 or y.max().item() >= num_classes):
        raise ShapeError(f"{name}: class indices outside [0, {num_classes})")
    return y


def clip_to_unit(x: torch.Tensor) -> torch.Tensor:
    """Elementwise min(1, max(0, x)); idempotent."""
    return x.clamp(0.0, 1.0)


def to_synthesis_space(x: torch.Tensor) -> torch.Tensor:
    """Adapt a batch to the synthesis stack's 3x32x32 space.

    Grayscale channels are replicated to 3 and 28x28 images are zero-padded to
    32x32. Both operations are differentiable so attack gradients flow through.
    """
    if x.shape[1] == 1:
        x = x.expand(-1, 3, -1, -1)
    if x.shape[-1] == 28:
        x = F.pad(x, (2, 2, 2, 2))
    if x.shape[1:] != (SYNTH_CHANNELS, SYNTH_SIZE, SYNTH_SIZE):
        raise ShapeError(f"cannot adapt shape {tuple(x.shape[1:])} to 3x32x32")
    return x
