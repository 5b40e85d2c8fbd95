"""Synthesis-quality rejector.

A projection discriminator that scores only the synthetic image (conditioned
on the predicted label): syntheses produced under a label that contradicts the
input's semantics come out unrealistic and score low.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from ..synthesis.discriminators import ProjectionDiscriminator


class QualityDiscriminator(ProjectionDiscriminator):
    pass


def dis_score(quality: QualityDiscriminator, x_syn: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Per-sample realism score of the synthesis under its conditioning label."""
    return quality(x_syn, y)


def quality_hinge_loss(
    quality: QualityDiscriminator,
    x_syn_true: torch.Tensor,
    x_syn_wrong: torch.Tensor,
    y: torch.Tensor,
) -> torch.Tensor:
    """ReLU(1 - Dis(x'_y, y)) + ReLU(1 + Dis(x'_y', y)), batch means."""
    return F.relu(1.0 - quality(x_syn_true, y)).mean() + F.relu(1.0 + quality(x_syn_wrong, y)).mean()
