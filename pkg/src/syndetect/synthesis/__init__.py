from .discriminators import AuxDiscriminator, ProjectionDiscriminator
from .encoder import LATENT_DIM, Encoder, LatentCode, encode
from .generator import Generator, synthesize
from .losses import (
    aux_hinge_loss,
    build_aux_pairs,
    disc_hinge_loss,
    generator_finetune_loss,
    generator_loss,
    kl_divergence,
    reconstruction_l2,
    ssim_term,
)

__all__ = [
    "AuxDiscriminator",
    "ProjectionDiscriminator",
    "LATENT_DIM",
    "Encoder",
    "LatentCode",
    "encode",
    "Generator",
    "synthesize",
    "aux_hinge_loss",
    "build_aux_pairs",
    "disc_hinge_loss",
    "generator_finetune_loss",
    "generator_loss",
    "kl_divergence",
    "reconstruction_l2",
    "ssim_term",
]
