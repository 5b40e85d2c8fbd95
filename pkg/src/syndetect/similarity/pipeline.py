"""The assembled detector: classifier -> encoder -> generator -> rejectors.

Inference is read-only (all modules in eval mode, no_grad); attacks use the
differentiable ``detector_terms`` path instead, which shares one synthesis
forward across all loss terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from ..classifiers.models import Classifier
from ..core.errors import ConfigurationError
from ..core.images import to_synthesis_space, validate_image_batch
from ..synthesis.encoder import Encoder, encode
from ..synthesis.generator import Generator
from .metric import SIMILAR, FeatureExtractorPair, MetricHead
from .quality import QualityDiscriminator
from .ssim import ssim
from .verdict import RejectorScores, ThresholdSet, Verdict, fuse


@dataclass
class DetectionPipeline:
    classifier: Classifier
    encoder: Encoder
    generator: Generator
    pair: FeatureExtractorPair
    head: MetricHead
    quality: QualityDiscriminator
    thresholds: ThresholdSet | None = None
    dataset: str = ""
    tags: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        tags = dict(self.tags)
        tags.setdefault("classifier", self.classifier.dataset or self.dataset)
        mismatched = {k: v for k, v in tags.items() if v and self.dataset and v != self.dataset}
        if mismatched:
            raise ConfigurationError(f"components trained on different datasets: {mismatched} vs {self.dataset!r}")
        self.eval()

    def eval(self) -> "DetectionPipeline":
        for m in (self.classifier, self.encoder, self.generator, self.pair, self.head, self.quality):
            m.eval()
        return self

    def modules(self):
        return (self.classifier, self.encoder, self.generator, self.pair, self.head, self.quality)

    # ----- inference (read-only) -------------------------------------------------

    @torch.no_grad()
    def predict(self, x: torch.Tensor) -> torch.Tensor:
        return self.classifier(x).argmax(1)

    @torch.no_grad()
    def rejector_scores(self, x: torch.Tensor, labels: torch.Tensor | None = None) -> tuple[RejectorScores, torch.Tensor]:
        """Score a batch under the given (or predicted) conditioning labels."""
        validate_image_batch(x, "detect input")
        y = self.classifier(x).argmax(1) if labels is None else labels
        x32 = to_synthesis_space(x)
        code = encode(self.encoder, x32, training=False)
        x_syn = self.generator(code.sample, y)
        scores = RejectorScores(
            dmm_dissimilarity=_np(F.softmax(self.head(self.pair.embed(x32, x_syn)), dim=1)[:, 1]),
            ssim_value=_np(ssim(x32, x_syn)),
            dis_score=_np(self.quality(x_syn, y)),
        )
        return scores, y

    def detect(self, x: torch.Tensor) -> list[Verdict]:
        """Classify, synthesize from the prediction, and fuse the rejectors."""
        if self.thresholds is None:
            raise ConfigurationError("pipeline has no calibrated thresholds; run calibration first")
        scores, y = self.rejector_scores(x)
        return fuse(scores, self.thresholds, predicted_labels=_np(y))

    # ----- differentiable path for detector-aware attacks -------------------------

    def detector_terms(self, x: torch.Tensor, y_cond: torch.Tensor) -> dict[str, torch.Tensor]:
        """Per-sample loss terms with gradients flowing back to ``x``.

        The conditioning label is held fixed (it is discrete); gradients flow
        through the encoder/generator and the direct image terms. Keys:
        ``l2``, ``ssim`` (both 1-SSIM), ``dmm`` (cross-entropy toward
        "similar"), ``dis`` (hinge on the quality score). All shaped (n,).
        """
        x32 = to_synthesis_space(x)
        code = encode(self.encoder, x32, training=False)
        x_syn = self.generator(code.sample, y_cond)
        logits = self.head(self.pair.embed(x32, x_syn))
        target = torch.full((len(x32),), SIMILAR, dtype=torch.long, device=x32.device)
        return {
            "l2": (x32 - x_syn).pow(2).flatten(1).mean(1),
            "ssim": 1.0 - ssim(x32, x_syn),
            "dmm": F.cross_entropy(logits, target, reduction="none"),
            "dis": F.relu(1.0 - self.quality(x_syn, y_cond)),
        }

    def parameter_checksum(self) -> float:
        """Cheap read-only fingerprint over every parameter (purity checks)."""
        total = 0.0
        for m in self.modules():
            for p in m.parameters():
                total += float(p.detach().double().sum())
        return total


def _np(t: torch.Tensor) -> np.ndarray:
    return t.detach().cpu().numpy()
