"""Training losses for the encoder/generator/discriminator stack.

Hinge terms follow the usual spectral-norm GAN convention; every composite is
an unweighted sum of its addends.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from ..core.errors import ShapeError
from ..similarity.ssim import ssim
from .discriminators import AuxDiscriminator, ProjectionDiscriminator
from .encoder import LatentCode


def kl_divergence(code: LatentCode) -> torch.Tensor:
    """KL(N(mean, var) || N(0, I)), averaged over the batch.

    Closed form per sample: 0.5 * sum(mean^2 + var - 1 - log var). Zero exactly
    when mean = 0 and log_variance = 0.
    """
    mu, logvar = code.mean, code.log_variance
    per_sample = 0.5 * (mu.pow(2) + logvar.exp() - 1.0 - logvar).sum(dim=1)
    return per_sample.mean()


def reconstruction_l2(x: torch.Tensor, x_syn: torch.Tensor) -> torch.Tensor:
    """Mean squared pixel error."""
    if x.shape != x_syn.shape:
        raise ShapeError("l2 term: shape mismatch between input and synthesis")
    return F.mse_loss(x_syn, x)


def ssim_term(x: torch.Tensor, x_syn: torch.Tensor) -> torch.Tensor:
    """1 - SSIM, so that lower is better like every other addend."""
    return 1.0 - ssim(x, x_syn).mean()


def build_aux_pairs(
    x: torch.Tensor, x_syn_true: torch.Tensor, x_syn_wrong: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Difference images for the auxiliary discriminator: (x - x'_y, x - x'_y')."""
    if not (x.shape == x_syn_true.shape == x_syn_wrong.shape):
        raise ShapeError("build_aux_pairs: all three batches must share a shape")
    return x - x_syn_true, x - x_syn_wrong


def _pair_hinge(pos_scores: torch.Tensor, neg_scores: torch.Tensor) -> torch.Tensor:
    return F.relu(1.0 - pos_scores).mean() + F.relu(1.0 + neg_scores).mean()


def aux_hinge_loss(
    d_aux: AuxDiscriminator, x_pos: torch.Tensor, x_neg: torch.Tensor, y: torch.Tensor
) -> torch.Tensor:
    """ReLU(1 - D(x_pos, y)) + ReLU(1 + D(x_neg, y)), batch means."""
    return _pair_hinge(d_aux(x_pos, y), d_aux(x_neg, y))


def disc_hinge_loss(
    d: ProjectionDiscriminator, x_real: torch.Tensor, x_syn: torch.Tensor, y: torch.Tensor
) -> torch.Tensor:
    """ReLU(1 - D(x, y)) + ReLU(1 + D(x'_y, y)), batch means."""
    return _pair_hinge(d(x_real, y), d(x_syn, y))


def generator_adversarial(gen_score: torch.Tensor) -> torch.Tensor:
    return F.relu(1.0 - gen_score).mean()


def generator_loss(
    x: torch.Tensor, x_syn: torch.Tensor, code: LatentCode, gen_score: torch.Tensor
) -> torch.Tensor:
    """KL + l2 + (1 - SSIM) + hinge adversarial term, each weighted 1.0."""
    return kl_divergence(code) + reconstruction_l2(x, x_syn) + ssim_term(x, x_syn) + generator_adversarial(gen_score)


def generator_finetune_loss(
    x: torch.Tensor,
    x_syn: torch.Tensor,
    code: LatentCode,
    gen_score: torch.Tensor,
    d_aux: AuxDiscriminator,
    x_syn_wrong: torch.Tensor,
    y: torch.Tensor,
    aux_weight: float = 1.0,
) -> torch.Tensor:
    """Generator loss plus the frozen-D_aux pair term (Stage-1 fine-tuning).

    The caller freezes D_aux; gradients flow into the encoder/generator through
    the difference images only. ``aux_weight`` exists for the reduction check
    against the plain generator loss and defaults to 1.
    """
    base = generator_loss(x, x_syn, code, gen_score)
    if aux_weight == 0.0:
        return base
    x_pos, x_neg = build_aux_pairs(x, x_syn, x_syn_wrong)
    return base + aux_weight * aux_hinge_loss(d_aux, x_pos, x_neg, y)
