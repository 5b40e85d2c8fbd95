from .metric import DISSIMILAR, EMBED_DIM, SIMILAR, FeatureExtractorPair, MetricHead, dmm_score, triplet_loss
from .pipeline import DetectionPipeline
from .quality import QualityDiscriminator, dis_score, quality_hinge_loss
from .ssim import ssim, ssim_constant_pair
from .verdict import REJECTORS, RejectorScores, ThresholdSet, Verdict, fuse, rejection_mask, trigger_masks

__all__ = [
    "DISSIMILAR",
    "EMBED_DIM",
    "SIMILAR",
    "FeatureExtractorPair",
    "MetricHead",
    "dmm_score",
    "triplet_loss",
    "DetectionPipeline",
    "QualityDiscriminator",
    "dis_score",
    "quality_hinge_loss",
    "ssim",
    "ssim_constant_pair",
    "REJECTORS",
    "RejectorScores",
    "ThresholdSet",
    "Verdict",
    "fuse",
    "rejection_mask",
    "trigger_masks",
]
